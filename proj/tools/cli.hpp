#pragma once
#include <string>
#include <vector>
namespace qsdcert { int run_cli(const std::vector<std::string>& args); }
