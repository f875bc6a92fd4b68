#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "planx/optim.hpp"

namespace planx {

// Checkpoints are a JSON manifest naming each parameter with its shape and
// byte offset, next to a blob of little-endian float32 values.
//   <prefix>.json  manifest (params list + free-form meta)
//   <prefix>.bin   packed parameter data
void save_checkpoint(const std::string& prefix, const ParamRegistry& params,
                     const std::string& meta_json = "{}");

// Loads into an existing registry; shapes must match the manifest.
// Returns the manifest's meta object as a JSON string.
std::string load_checkpoint(const std::string& prefix, ParamRegistry& params);

bool checkpoint_exists(const std::string& prefix);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

// Hash of all parameter values in registry order.
std::string registry_hash(const ParamRegistry& params);

void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace planx
