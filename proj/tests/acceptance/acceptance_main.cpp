#include <iostream>
#include "suite.hpp"

int main(int argc, char** argv)
{
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::stoi(argv[i]));
    return l0bnb::acceptance::run_all(std::cout, only) ? 0 : 1;
}
