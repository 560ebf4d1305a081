#pragma once

#include <optional>
#include <string>
#include <vector>

#include "witness/lp.hpp"
#include "witness/reachform.hpp"

namespace witness::certify {

using model::Mode;

enum class Sense { Le, Lt, Ge, Gt };

const char* to_string(Sense s);
std::optional<Sense> sense_from_string(const std::string& text);
inline bool is_lower_bound(Sense s) { return s == Sense::Ge || s == Sense::Gt; }
inline bool is_strict(Sense s) { return s == Sense::Lt || s == Sense::Gt; }

/// A threshold query "Pr^mode(eventually goal) <sense> threshold".
struct PropertyQuery {
    Mode mode = Mode::Min;
    Sense sense = Sense::Ge;
    double threshold = 0.0;
};

/// Which vector shape certifies the query: lower-bounded min and
/// upper-bounded max queries use a vector over states, the other two a
/// nonnegative vector over state-action rows.
enum class CertificateKind { StateVector, PairVector };

CertificateKind kind_for(const PropertyQuery& query);

struct Certificate {
    CertificateKind kind = CertificateKind::StateVector;
    std::vector<double> values;
    PropertyQuery query;
};

/// Finds a vector satisfying the certificate conditions of the query, or
/// nothing when the property does not hold. Non-strict senses solve the plain
/// feasibility LP; strict senses relax the strict inequality to its
/// non-strict counterpart and optimize in the strict direction, succeeding
/// exactly when the optimum satisfies the original strict inequality.
std::optional<Certificate> generate_certificate(const reachform::ReachabilityForm& rf,
                                                const PropertyQuery& query);

struct CheckReport {
    enum class RowKind { Constraint, Threshold, Nonnegativity };
    struct Violation {
        RowKind kind;
        int index;       // constraint row / vector entry; -1 for the threshold
        double residual; // by how much the relaxed inequality fails
    };
    bool ok = false;
    std::vector<Violation> violations;
};

/// Verifies the certificate conditions with every inequality loosened by the
/// tolerance (for example A v - t <= b and v(s0) + t >= lambda for
/// lower-bounded min queries; nonnegativity is relaxed to entries >= -t).
/// Pure; reports every violated row with its residual.
CheckReport check_certificate(const reachform::ReachabilityForm& rf, const PropertyQuery& query,
                              const std::vector<double>& vector, double tolerance);

/// One-line header (kind, mode, sense, lambda, model digest, dimension)
/// followed by "<index> <value>" lines for the nonzero entries.
std::string write_certificate(const Certificate& certificate, const std::string& model_digest);

struct ParsedCertificate {
    Certificate certificate;
    std::string model_digest;
};

ParsedCertificate read_certificate(const std::string& text);

} // namespace witness::certify
