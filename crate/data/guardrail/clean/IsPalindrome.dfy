// Checks whether a sequence reads the same forwards and backwards.
method IsPalindrome(s: seq<char>) returns (r: bool)
  ensures r <==> forall k :: 0 <= k < |s| ==> s[k] == s[|s| - 1 - k]
{
  var i := 0;
  while i < |s| / 2
    invariant 0 <= i <= |s| / 2
    invariant forall k :: 0 <= k < i ==> s[k] == s[|s| - 1 - k]
  {
    if s[i] != s[|s| - 1 - i] {
      return false;
    }
    i := i + 1;
  }
  return true;
}

method TestIsPalindrome() {
  var r := IsPalindrome("abba");
  assert r;
  r := IsPalindrome("ab");
  assert "ab"[0] != "ab"[1]; // helper
  assert !r;
}
