#include <string>
#include <vector>

#include "msa/cli.hpp"

int main(int argc, char** argv) { return msa::execute(std::vector<std::string>(argv, argv + argc)); }
