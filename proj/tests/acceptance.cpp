// Placeholder acceptance binary; fleshed out alongside calibration.
#include <iostream>
int main() {
  std::cout << "[FAIL] acceptance suite not yet implemented\n";
  return 1;
}
