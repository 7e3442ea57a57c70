#include "epic/runner.hpp"

int main(int argc, char** argv) { return epic::cli_main(argc, argv); }
