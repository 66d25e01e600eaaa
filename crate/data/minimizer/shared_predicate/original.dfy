method A(x: int) returns (y: int)
{
  y := x + 1;
}

method B(x: int) returns (y: int)
{
  y := A(x);
}
