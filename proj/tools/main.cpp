#include "subt_beacon/harness.hpp"

int main(int argc, char** argv) {
  return subt_beacon::harness::run_cli(argc, argv);
}
