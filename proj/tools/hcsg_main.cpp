#include "hcsg/cli.hpp"

int main(int argc, char** argv) { return hcsg::dispatch(argc, argv); }
