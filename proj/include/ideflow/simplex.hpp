#pragma once

// Exact linear feasibility over the rationals: phase-one simplex with
// Bland's rule (no cycling), artificial variables, and free-variable
// splitting. Only feasibility is needed by the thin-flow solver, so there is
// no phase two.

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/rational.hpp"

namespace ideflow {

enum class VarSign { NonNeg, Free };
enum class RowRel { Eq, Le, Ge };

class LinearFeasibility {
  public:
    int add_var(VarSign sign = VarSign::NonNeg) {
        vars_.push_back(sign);
        return static_cast<int>(vars_.size()) - 1;
    }

    /// Adds the row  sum(coeff * var) rel rhs. Duplicate vars are summed.
    void add_row(const std::vector<std::pair<int, Rat>>& terms, RowRel rel, Rat rhs) {
        Row row;
        std::map<int, Rat> sums;
        for (const auto& [v, c] : terms) {
            if (v < 0 || v >= static_cast<int>(vars_.size()))
                throw ParamError("add_row: unknown variable");
            sums[v] += c;
        }
        for (auto& [v, c] : sums)
            if (!c.is_zero()) row.terms.emplace_back(v, std::move(c));
        row.rel = rel;
        row.rhs = std::move(rhs);
        rows_.push_back(std::move(row));
    }

    std::size_t row_count() const { return rows_.size(); }
    std::size_t var_count() const { return vars_.size(); }

    /// Returns one feasible assignment (empty optional if none exists).
    std::optional<std::vector<Rat>> solve() const {
        // Column layout: positive part per variable, negative part for free
        // variables, one slack/surplus per inequality, artificial per row.
        std::vector<int> pos_col(vars_.size()), neg_col(vars_.size(), -1);
        int ncols = 0;
        for (std::size_t v = 0; v < vars_.size(); ++v) {
            pos_col[v] = ncols++;
            if (vars_[v] == VarSign::Free) neg_col[v] = ncols++;
        }
        const int nstruct = ncols;
        for (const auto& r : rows_)
            if (r.rel != RowRel::Eq) ++ncols;
        const int nslack_end = ncols;
        ncols += static_cast<int>(rows_.size());  // artificials

        const std::size_t m = rows_.size();
        std::vector<std::vector<Rat>> tab(m, std::vector<Rat>(ncols + 1));
        std::vector<int> basis(m);
        int slack_at = nstruct;
        for (std::size_t r = 0; r < m; ++r) {
            const Row& row = rows_[r];
            for (const auto& [v, c] : row.terms) {
                tab[r][pos_col[v]] += c;
                if (neg_col[v] >= 0) tab[r][neg_col[v]] -= c;
            }
            if (row.rel == RowRel::Le)
                tab[r][slack_at++] = Rat(1);
            else if (row.rel == RowRel::Ge)
                tab[r][slack_at++] = Rat(-1);
            tab[r][ncols] = row.rhs;
            if (tab[r][ncols].sign() < 0)
                for (auto& cell : tab[r]) cell = -cell;
            tab[r][nslack_end + r] = Rat(1);
            basis[r] = nslack_end + static_cast<int>(r);
        }

        // Phase-one objective: minimize the sum of artificials. With the
        // artificial basis, the reduced-cost row is the column-wise sum of
        // all constraint rows (artificial columns excluded).
        std::vector<Rat> cost(ncols);
        Rat objective;
        for (std::size_t r = 0; r < m; ++r) {
            for (int j = 0; j < nslack_end; ++j) cost[j] += tab[r][j];
            objective += tab[r][ncols];
        }

        while (true) {
            int enter = -1;
            for (int j = 0; j < ncols; ++j) {
                if (cost[j].sign() > 0) {  // Bland: first improving column
                    enter = j;
                    break;
                }
            }
            if (enter < 0) break;
            int leave = -1;
            Rat best_ratio;
            for (std::size_t r = 0; r < m; ++r) {
                if (tab[r][enter].sign() <= 0) continue;
                const Rat ratio = tab[r][ncols] / tab[r][enter];
                if (leave < 0 || ratio < best_ratio ||
                    (ratio == best_ratio && basis[r] < basis[leave])) {
                    leave = static_cast<int>(r);
                    best_ratio = ratio;
                }
            }
            if (leave < 0)
                throw InternalError("phase-one simplex: unbounded improving column");
            // Pivot on (leave, enter).
            const Rat piv = tab[leave][enter];
            for (auto& cell : tab[leave]) cell /= piv;
            for (std::size_t r = 0; r < m; ++r) {
                if (static_cast<int>(r) == leave) continue;
                const Rat factor = tab[r][enter];
                if (factor.is_zero()) continue;
                for (int j = 0; j <= ncols; ++j) tab[r][j] -= factor * tab[leave][j];
            }
            const Rat cfac = cost[enter];
            if (!cfac.is_zero()) {
                for (int j = 0; j < ncols; ++j) cost[j] -= cfac * tab[leave][j];
                objective -= cfac * tab[leave][ncols];
            }
            basis[leave] = enter;
        }

        if (objective.sign() != 0) return std::nullopt;  // infeasible

        std::vector<Rat> col_val(ncols);
        for (std::size_t r = 0; r < m; ++r) col_val[basis[r]] = tab[r][ncols];
        std::vector<Rat> out(vars_.size());
        for (std::size_t v = 0; v < vars_.size(); ++v) {
            out[v] = col_val[pos_col[v]];
            if (neg_col[v] >= 0) out[v] -= col_val[neg_col[v]];
        }
        return out;
    }

  private:
    struct Row {
        std::vector<std::pair<int, Rat>> terms;
        RowRel rel;
        Rat rhs;
    };
    std::vector<VarSign> vars_;
    std::vector<Row> rows_;
};

}  // namespace ideflow
