#include "demo.hpp"

#include <iostream>

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: ragprune_demo <out-dir>\n";
    return 2;
  }
  try {
    ragprune::cli::write_demo_data(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "ragprune_demo: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << argv[1] << "/{corpus,cache,triples}.jsonl and config.json\n";
}
