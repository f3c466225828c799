#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "sqiv/error.hpp"

int main(int argc, char** argv) {
  sqiv::set_warning_sink([](const std::string&) {});
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
