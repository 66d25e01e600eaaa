lemma Double(x: int)
  ensures x * 2 == x + x
{
}

method M(x: int) returns (y: int)
  ensures y == x + x
{
  y := x * 2;
  assert y == x + x by {
    Double(x);
  }
}
