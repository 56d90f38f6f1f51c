#pragma once

#include <string>
#include <vector>

#include "ganblend/config.hpp"
#include "ganblend/tensor.hpp"

namespace ganblend {

struct ParamSpec {
  std::string name;
  Shape shape;
};

// Authoritative parameter list of the generator for a config, in forward order:
// mapping.fc{i}.{weight,bias}, then per band ascending
// const (band 4 only), conv0 (not at band 4), conv1, torgb.
std::vector<ParamSpec> manifest(const GeneratorConfig& config);

std::string mapping_param(int layer, const char* field);
std::string synthesis_param(int resolution, const char* layer, const char* field);

}  // namespace ganblend
