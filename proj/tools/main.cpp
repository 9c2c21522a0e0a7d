#include "gradal/harness.hpp"

int main(int argc, char** argv) { return gradal::cli_main(argc, argv); }
