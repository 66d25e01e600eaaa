method M(x: int) returns (y: int)
{
  y := x * 2;
}
