#include "stdgnn/cli.hpp"

int main(int argc, char** argv) { return stdgnn::run_cli(argc, argv); }
