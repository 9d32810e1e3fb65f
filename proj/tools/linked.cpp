#include "linked/cli/app.hpp"

int main(int argc, char** argv) { return linked::cli::run(argc, argv); }
