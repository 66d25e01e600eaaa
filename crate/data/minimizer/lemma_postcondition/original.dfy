method Run(n: nat)
{
  var k := n + 1;
}
