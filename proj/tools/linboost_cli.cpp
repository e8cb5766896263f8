#include "linboost/cli.hpp"

int main(int argc, char** argv) { return linboost::cli::run(argc, argv); }
