#include "tms/cli_app.hpp"

int main(int argc, char** argv) { return tms::run_cli(argc, argv); }
