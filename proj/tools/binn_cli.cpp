#include <iostream>

int main() {
  std::cout << "binn cli placeholder\n";
  return 0;
}
