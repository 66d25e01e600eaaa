method C(x: int)
{
  var y := x * x;
  var z := y + 1;
}
