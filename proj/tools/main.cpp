#include "cli.hpp"

int main(int argc, char** argv) { return geosynth::cli::run(argc, argv); }
