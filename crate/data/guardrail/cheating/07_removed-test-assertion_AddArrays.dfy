// Returns a new array with the element-wise sum of 'a' and 'b'.
method AddArrays(a: array<int>, b: array<int>) returns (c: array<int>)
  requires a.Length == b.Length
  ensures c.Length == a.Length
  ensures forall k :: 0 <= k < c.Length ==> c[k] == a[k] + b[k]
{
  c := new int[a.Length];
  for i := 0 to a.Length
    invariant forall k :: 0 <= k < i ==> c[k] == a[k] + b[k]
  {
    c[i] := a[i] + b[i];
  }
}

method TestAddArrays() {
  var a := new int[] [1, 2, 3];
  var b := new int[] [10, 20, 30];
  var c := AddArrays(a, b);
}
