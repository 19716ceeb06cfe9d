#include <cstdio>

int main() {
  std::puts("flowtwin: subcommands land here");
  return 0;
}
