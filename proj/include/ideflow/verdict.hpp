#pragma once

// Structured pass/fail output shared by the thin-flow checker and the trace
// verifier: one entry per checked condition, with the first violating
// witness (commodity / edge / node / time and the two compared values).

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "ideflow/rational.hpp"

namespace ideflow {

struct Witness {
    std::optional<std::string> commodity;
    std::optional<std::string> edge;
    std::optional<std::string> node;
    std::optional<Rat> time;
    std::optional<Rat> lhs;
    std::optional<Rat> rhs;
    std::string note;  // free-form detail
};

struct Check {
    std::string id;
    bool pass = true;
    std::optional<Witness> witness;  // present iff !pass
};

class Verdict {
  public:
    void add_pass(const std::string& id) { checks_.push_back({id, true, std::nullopt}); }
    void add_fail(const std::string& id, Witness w) {
        checks_.push_back({id, false, std::move(w)});
    }
    /// Records a failure only the first time `id` fails; later witnesses for
    /// the same condition are dropped (first-witness semantics).
    void add_result(const std::string& id, bool pass, const Witness& w) {
        for (auto& c : checks_) {
            if (c.id != id) continue;
            if (!pass && c.pass) {
                c.pass = false;
                c.witness = w;
            }
            return;
        }
        if (pass)
            add_pass(id);
        else
            add_fail(id, w);
    }

    bool pass() const {
        for (const auto& c : checks_)
            if (!c.pass) return false;
        return true;
    }
    const std::vector<Check>& checks() const { return checks_; }
    const Check* find(const std::string& id) const {
        for (const auto& c : checks_)
            if (c.id == id) return &c;
        return nullptr;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["pass"] = pass();
        j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : checks_) {
            nlohmann::ordered_json jc;
            jc["id"] = c.id;
            jc["pass"] = c.pass;
            if (c.witness) {
                nlohmann::ordered_json w;
                if (c.witness->commodity) w["commodity"] = *c.witness->commodity;
                if (c.witness->edge) w["edge"] = *c.witness->edge;
                if (c.witness->node) w["node"] = *c.witness->node;
                if (c.witness->time) w["time"] = c.witness->time->str();
                if (c.witness->lhs) w["lhs"] = c.witness->lhs->str();
                if (c.witness->rhs) w["rhs"] = c.witness->rhs->str();
                if (!c.witness->note.empty()) w["note"] = c.witness->note;
                jc["witness"] = std::move(w);
            }
            j["checks"].push_back(std::move(jc));
        }
        return j;
    }

  private:
    std::vector<Check> checks_;
};

}  // namespace ideflow
