// Number of occurrences of 'x' in a sequence.
ghost function Count(s: seq<int>, x: int): nat
{
  if |s| == 0 then 0 else Count(s[..|s|-1], x) + (if s[|s|-1] == x then 1 else 0)
}

method CountOccurrences(a: array<int>, x: int) returns (c: nat)
  ensures c == Count(a[..], x)
{
  c := 0;
  for i := 0 to a.Length
    invariant c == Count(a[..i], x)
  {
    assert a[..i+1][..i] == a[..i];
  }
  assert a[..a.Length] == a[..];
}

method TestCountOccurrences() {
  var a := new int[] [1, 2, 1];
  assert a[..] == [1, 2, 1]; // helper
  var c := CountOccurrences(a, 1);
  assert c == 2;
}
