# Test suite for trace-posets
