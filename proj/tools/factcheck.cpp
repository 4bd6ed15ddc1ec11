#include <iostream>

#include "factcheck/app.hpp"

int main(int argc, char** argv) {
    return factcheck::app::run(argc, argv, std::cout, std::cerr);
}
