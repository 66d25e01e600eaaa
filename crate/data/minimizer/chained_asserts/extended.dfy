method C(x: int)
{
  var y := x * x;
  assert y >= 0;
  assert y + 1 > 0;
  var z := y + 1;
  assert z > 0;
  assert z >= 1;
}
