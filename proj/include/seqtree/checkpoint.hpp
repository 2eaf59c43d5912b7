#pragma once

#include "seqtree/particle.hpp"

#include <string>

namespace seqtree {

// Versioned JSON checkpoint of a cloud: configuration, the full data store,
// and every particle's tree plus raw sufficient statistics.  Doubles are
// serialized with shortest round-trip formatting, so restoring a checkpoint
// and continuing the run reproduces an uninterrupted run bit for bit.
std::string cloud_to_json(const Cloud& cloud);
Cloud cloud_from_json(const std::string& text);

void save_cloud(const Cloud& cloud, const std::string& path);
Cloud load_cloud(const std::string& path);

}  // namespace seqtree
