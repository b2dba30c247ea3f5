#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return alert_surface::cli::run_cli(argc, argv, std::cout, std::cerr);
}
