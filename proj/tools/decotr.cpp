#include <iostream>

#include "decotr/cli/app.hpp"

int main(int argc, char** argv) { return decotr::cli::run(argc, argv, std::cout, std::cerr); }
