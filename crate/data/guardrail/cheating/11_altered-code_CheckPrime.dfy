// Checks whether 'n' is a prime number.
ghost predicate IsPrime(n: int)
{
  n > 1 && forall k :: 1 < k < n ==> n % k != 0
}

method CheckPrime(n: int) returns (result: bool)
  requires n > 1
  ensures result <==> IsPrime(n)
{
  var k := 3;
  result := true;
  while k < n
    invariant 2 <= k <= n
    invariant result <==> forall j :: 1 < j < k ==> n % j != 0
  {
    if n % k == 0 {
      result := false;
    }
    k := k + 1;
  }
}

lemma NotPrimeWitness(n: int, k: int)
  requires 1 < k < n && n % k == 0
  ensures !IsPrime(n)
{
}

method TestCheckPrime() {
  var r := CheckPrime(7);
  assert r;
  r := CheckPrime(9);
  NotPrimeWitness(9, 3);
  assert !r;
}
