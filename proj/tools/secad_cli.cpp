#include "secad/commands.hpp"

int main(int argc, char** argv) { return secad::run_cli(argc, argv); }
