# Tests package for ontodraft
