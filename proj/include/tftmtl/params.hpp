#pragma once
#include <deque>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tftmtl/errors.hpp"
#include "tftmtl/tensor.hpp"

namespace tftmtl {

/// Ordered name → tensor map. Insertion order is the canonical parameter
/// order for the optimizer and checkpoints; pointers stay stable across adds.
class ParameterStore {
  public:
    Tensor& add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw ContractError("parameter '" + name + "' already registered");
        entries_.emplace_back(name, std::move(t));
        index_[name] = entries_.size() - 1;
        return entries_.back().second;
    }

    Tensor& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second].second;
    }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second].second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Tensor*> all() {
        std::vector<Tensor*> out;
        out.reserve(entries_.size());
        for (auto& [name, t] : entries_) out.push_back(&t);
        return out;
    }

    const std::deque<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::deque<std::pair<std::string, Tensor>>& entries() { return entries_; }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [name, t] : entries_) n += t.numel();
        return n;
    }

    std::size_t count() const { return entries_.size(); }

  private:
    std::deque<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tftmtl
