// Sum of the elements of a sequence, defined recursively from the end.
ghost function Sum(s: seq<int>): int
{
  if |s| == 0 then 0 else Sum(s[..|s|-1]) + s[|s|-1]
}

// Computes the sum of all elements in array 'a'.
method SumArray(a: array<int>) returns (sum: int)
  ensures sum == Sum(a[..])
{
  sum := 0;
  var i := 0;
  while i < a.Length
    invariant 0 <= i <= a.Length
    invariant sum == Sum(a[..i])
  {
    assert a[..i+1] == a[..i] + [a[i]];
    sum := sum + a[i];
    i := i + 1;
  }
  assume sum == Sum(a[..]);
}

method TestSumArray() {
  var a := new int[] [1, 2, 3];
  assert a[..] == [1, 2, 3]; // helper
  var s := SumArray(a);
  assert s == 6;
  // assert s == 5; //@invalid
  var e := new int[0];
  s := SumArray(e);
  assert s == 0;
}
