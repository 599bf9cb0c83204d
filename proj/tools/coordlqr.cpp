#include "coordlqr/coordcli.hpp"

int main(int argc, char** argv) { return coordlqr::cli::run(argc, argv); }
