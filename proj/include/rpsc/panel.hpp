#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rpsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class Layout { Wide, Long };

/// Unit-by-time outcome panel.
///
/// Rows are units in the order they were read, columns are periods in
/// increasing time order. `mask(i, t)` is true when the outcome is observed;
/// unobserved cells hold 0 in `values`. `t0` counts the pre-intervention
/// periods, so columns [0, t0) are the training window and [t0, T) the
/// post-intervention window.
struct Panel {
  Matrix values;
  Mask mask;
  std::vector<std::string> unit_labels;
  std::vector<double> time_labels;
  std::optional<std::size_t> treated;
  std::optional<std::size_t> t0;

  std::size_t units() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t periods() const { return static_cast<std::size_t>(values.cols()); }

  bool operator==(const Panel& other) const;
};

Panel load_panel(const std::filesystem::path& path, Layout layout);
Panel read_panel(std::istream& in, Layout layout);

void write_panel(std::ostream& out, const Panel& panel, Layout layout);

Layout parse_layout(const std::string& name);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::size_t> missing_per_unit;
  std::size_t pre_periods = 0;
  std::size_t post_periods = 0;
};

/// Checks every panel invariant; never throws.
ValidationReport validate(const Panel& panel);

/// Throws ValidationError listing all violations when `validate` fails.
void require_valid(const Panel& panel);

std::size_t find_unit(const Panel& panel, const std::string& label);

/// Index of the first post-intervention period when `label` is the last
/// pre-intervention time label.
std::size_t resolve_t0(const Panel& panel, double label);

bool has_regular_spacing(const std::vector<double>& times, double rel_tol = 1e-9);

/// Copy of `panel` with the given unit removed; the treated index is remapped
/// and cleared if the treated unit itself was removed.
Panel remove_unit(const Panel& panel, std::size_t unit);

/// Copy restricted to the first `periods` columns.
Panel truncate_periods(const Panel& panel, std::size_t periods);

}  // namespace rpsc
