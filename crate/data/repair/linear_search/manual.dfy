method LinearSearch(a: array<int>, x: int) returns (idx: int)
  ensures 0 <= idx <= a.Length
  ensures idx < a.Length ==> a[idx] == x
  ensures forall i :: 0 <= i < idx ==> a[i] != x
{
  idx := 0;
  while idx < a.Length
    invariant 0 <= idx <= a.Length
    invariant forall i :: 0 <= i < idx ==> a[i] != x
  {
    if a[idx] == x {
      return;
    }
    idx := idx + 1;
  }
}

method TestLinearSearch()
{
  var a := new int[] [4, 2, 7, 2];
  var idx := LinearSearch(a, 2);
  assert a[0] != 2 && a[1] == 2;
  assert idx == 1;
  // assert idx == 3; //@invalid
  idx := LinearSearch(a, 9);
  assert idx == 4;
  // assert idx == 0; //@invalid
}
