// Fibonacci numbers.
ghost function Fib(n: nat): nat
{
  if n < 2 then n else Fib(n - 2) + Fib(n - 1)
}

// Computes the n-th Fibonacci number iteratively.
method ComputeFib(n: nat) returns (f: nat)
  ensures f == Fib(n)
{
  if n == 0 { return 0; }
  var prev, cur := 0, 1;
  var i := 1;
  while i < n
    invariant 1 <= i <= n
    invariant prev == Fib(i - 1) && cur == Fib(i)
    decreases *
  {
    prev, cur := cur, prev + cur;
    i := i + 1;
  }
  return cur;
}

method TestComputeFib() {
  var f := ComputeFib(0);
  assert f == 0;
  f := ComputeFib(1);
  assert f == 1;
  f := ComputeFib(6);
  assert Fib(2) == 1 && Fib(3) == 2 && Fib(4) == 3 && Fib(5) == 5; // helper
  assert f == 8;
}
