#include "sqiv/error.hpp"

#include <atomic>
#include <iostream>

namespace sqiv {

namespace {
void default_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }
std::atomic<WarningSink> g_sink{&default_sink};
}  // namespace

void set_warning_sink(WarningSink sink) { g_sink.store(sink); }

void warn(const std::string& message) {
  if (auto sink = g_sink.load()) sink(message);
}

}  // namespace sqiv
