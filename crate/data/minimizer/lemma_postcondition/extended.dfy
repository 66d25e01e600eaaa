lemma Succ(n: nat)
  ensures n + 1 > n
  ensures n + 1 > 0
{
}

method Run(n: nat)
{
  var k := n + 1;
  Succ(n);
  assert k > 0;
}
