method Sum(n: nat) returns (s: nat)
  ensures s == n * (n + 1) / 2
{
  s := 0;
  var i := 0;
  while i < n
    invariant 0 <= i <= n
    invariant s == i * (i + 1) / 2
    decreases n - i
  {
    i := i + 1;
    s := s + i;
    assert s == i * (i + 1) / 2;
  }
  assert i == n;
}
