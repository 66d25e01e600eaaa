// Returns a fresh copy of array 'a'.
method CopyArray(a: array<int>) returns (b: array<int>)
  ensures fresh(b)
  ensures b.Length == a.Length
  ensures b[..] == a[..]
{
  b := new int[a.Length];
  var i := 0;
  while i < a.Length
    invariant 0 <= i <= a.Length
    invariant b[..i] == a[..i]
    decreases *
  {
    b[i] := a[i];
    i := i + 1;
  }
}

method TestCopyArray() {
  var a := new int[] [4, 5];
  var b := CopyArray(a);
  assert b[..] == [4, 5];
  b[0] := 7;
  assert a[0] == 4;
}
