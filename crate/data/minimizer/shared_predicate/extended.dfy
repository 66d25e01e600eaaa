ghost predicate Pos(x: int)
{
  x > 0
}

method A(x: int) returns (y: int)
  requires Pos(x)
  ensures y > x
{
  y := x + 1;
}

method B(x: int) returns (y: int)
  requires Pos(x)
  ensures y > 1
{
  y := A(x);
  assert y > x;
}
