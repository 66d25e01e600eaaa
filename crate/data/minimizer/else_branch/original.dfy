method Abs(x: int) returns (r: int)
{
  if x < 0 {
    r := -x;
  } else {
    r := x;
  }
}

method Max(a: int, b: int) returns (m: int)
{
  m := a;
  if b > a {
    m := b;
  }
}
