#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "woc/tensor.h"

namespace woc {

// A named learnable (or frozen) tensor plus its gradient and optimizer moments.
struct param {
    std::string name;
    tensor value;
    tensor grad;  // same shape, accumulated by backward passes
    tensor m, v;  // AdamW first/second moments
    bool trainable = true;
};

// Registration-ordered collection of params. Order is part of the public
// contract: checkpoints and finite-difference sweeps walk it in order.
struct param_store {
    std::vector<param> items;
    std::unordered_map<std::string, int> by_name;

    param& add(const std::string& name, tensor init, bool trainable = true);
    bool has(const std::string& name) const { return by_name.count(name) > 0; }
    int index_of(const std::string& name) const;
    param& get(const std::string& name) { return items[index_of(name)]; }
    const param& get(const std::string& name) const { return items[index_of(name)]; }
    void zero_grad();
    int64_t value_count() const;
};

} // namespace woc
