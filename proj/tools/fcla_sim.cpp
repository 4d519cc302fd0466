#include "fcla/cli.hpp"

int main(int argc, char** argv)
{
  return fcla::cli::cli_main(argc, argv);
}
