#include "fbctl/harness.hpp"

int main(int argc, char** argv) { return fbctl::run_cli(argc, argv); }
