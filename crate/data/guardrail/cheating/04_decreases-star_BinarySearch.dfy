// Checks if array 'a' is sorted in non-descending order.
ghost predicate IsSorted(a: array<int>) reads a
{ forall i, j :: 0 <= i < j < a.Length ==> a[i] <= a[j] }

// Finds a value 'x' in a sorted array 'a', and returns its index,
// or -1 if not found.
method BinarySearch(a: array<int>, x: int) returns (index: int)
  requires IsSorted(a)
  ensures -1 <= index < a.Length
  ensures if index != -1 then a[index] == x else x !in a[..]
{
  var low, high := 0, a.Length;
  while low < high
    invariant 0 <= low <= high <= a.Length
    invariant x !in a[..low] && x !in a[high..]
    decreases *
  {
    var mid := low + (high - low) / 2;
    if {
      case a[mid] < x => low := mid + 1;
      case a[mid] > x => high := mid;
      case a[mid] == x => return mid;
    }
  }
  return -1;
}

// Simple test cases to check the postcondition.
method TestBinarySearch() {
  // search in an array with duplicates
  var a := new int[] [1, 3, 3, 5, 7];
  assert a[..] == [1, 3, 3, 5, 7]; // helper
  var idx := BinarySearch(a, 3);
  assert idx == 1 || idx == 2;
  // assert idx == 1; //@invalid
  // search for missing values (between elements and after the last one)
  idx := BinarySearch(a, 4);
  assert a[2] < 4 < a[3]; // helper
  assert idx == -1;
  idx := BinarySearch(a, 9);
  assert idx == -1;
}
