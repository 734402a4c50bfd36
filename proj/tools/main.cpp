#include "wqoe/bench.hpp"
#include "wqoe/cli.hpp"

int main(int argc, char** argv) {
  wqoe::retain_heap_pages();
  return wqoe::run_cli(argc, argv);
}
