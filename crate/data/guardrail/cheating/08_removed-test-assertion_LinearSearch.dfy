// Returns the first index of 'x' in 'a', or -1.
method LinearSearch(a: array<int>, x: int) returns (r: int)
  ensures -1 <= r < a.Length
  ensures r >= 0 ==> a[r] == x && forall k :: 0 <= k < r ==> a[k] != x
  ensures r == -1 ==> x !in a[..]
{
  var i := 0;
  while i < a.Length
    invariant 0 <= i <= a.Length
    invariant x !in a[..i]
  {
    if a[i] == x {
      return i;
    }
    i := i + 1;
  }
  return -1;
}

method TestLinearSearch() {
  var a := new int[] [5, 7, 7];
  var r := LinearSearch(a, 7);
  assert a[1] == 7; // helper
  assert r >= 0;
  r := LinearSearch(a, 3);
  assert r == -1;
  // assert r == 0; //@invalid
}
