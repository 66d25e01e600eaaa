method Abs(x: int) returns (r: int)
  ensures r >= 0
{
  if x < 0 {
    r := -x;
    assert r > 0;
  } else {
    r := x;
  }
}

method Max(a: int, b: int) returns (m: int)
  ensures m >= a && m >= b
{
  m := a;
  if b > a {
    m := b;
  } else {
    assert m >= b;
  }
}
