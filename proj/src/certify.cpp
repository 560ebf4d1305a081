#include "witness/certify.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace witness::certify {

using lp::LinearProblem;
using lp::ObjectiveSense;
using lp::Relation;
using lp::SolveStatus;
using reachform::ReachabilityForm;

const char* to_string(Sense s) {
    switch (s) {
        case Sense::Le: return "le";
        case Sense::Lt: return "lt";
        case Sense::Ge: return "ge";
        default: return "gt";
    }
}

std::optional<Sense> sense_from_string(const std::string& text) {
    if (text == "le" || text == "<=") return Sense::Le;
    if (text == "lt" || text == "<") return Sense::Lt;
    if (text == "ge" || text == ">=") return Sense::Ge;
    if (text == "gt" || text == ">") return Sense::Gt;
    return std::nullopt;
}

CertificateKind kind_for(const PropertyQuery& query) {
    const bool lower = is_lower_bound(query.sense);
    if (query.mode == Mode::Min)
        return lower ? CertificateKind::StateVector : CertificateKind::PairVector;
    return lower ? CertificateKind::PairVector : CertificateKind::StateVector;
}

namespace {

int vector_dimension(const ReachabilityForm& rf, CertificateKind kind) {
    return kind == CertificateKind::StateVector ? rf.num_interior() : rf.index.rows();
}

} // namespace

std::optional<Certificate> generate_certificate(const ReachabilityForm& rf,
                                                const PropertyQuery& query) {
    const CertificateKind kind = kind_for(query);
    const bool lower = is_lower_bound(query.sense);
    const int dim = vector_dimension(rf, kind);

    LinearProblem problem;
    for (int i = 0; i < dim; ++i) problem.add_variable(0.0);

    if (kind == CertificateKind::StateVector) {
        // A z <= b (lower-bounded min) or A z >= b (upper-bounded max).
        auto rows = reachform::matrix_rows(rf);
        for (int r = 0; r < static_cast<int>(rows.size()); ++r)
            problem.add_constraint(rows[r], lower ? Relation::LessEqual : Relation::GreaterEqual,
                                   rf.to_goal(r));
        problem.add_constraint({{rf.initial, 1.0}},
                               lower ? Relation::GreaterEqual : Relation::LessEqual,
                               query.threshold);
        if (is_strict(query.sense)) {
            problem.objective_sense =
                lower ? ObjectiveSense::Maximize : ObjectiveSense::Minimize;
            problem.set_objective(rf.initial, 1.0);
        }
    } else {
        // y A <= delta (lower-bounded max) or y A >= delta (upper-bounded min).
        auto cols = reachform::matrix_columns(rf);
        for (int t = 0; t < static_cast<int>(cols.size()); ++t)
            problem.add_constraint(cols[t], lower ? Relation::LessEqual : Relation::GreaterEqual,
                                   t == rf.initial ? 1.0 : 0.0);
        std::vector<std::pair<int, double>> b_terms;
        for (int r = 0; r < rf.index.rows(); ++r)
            if (rf.to_goal(r) != 0.0) b_terms.emplace_back(r, rf.to_goal(r));
        problem.add_constraint(b_terms, lower ? Relation::GreaterEqual : Relation::LessEqual,
                               query.threshold);
        if (is_strict(query.sense)) {
            problem.objective_sense =
                lower ? ObjectiveSense::Maximize : ObjectiveSense::Minimize;
            for (auto [r, v] : b_terms) problem.set_objective(r, v);
        }
    }

    lp::Solution solution = lp::solve_lp(problem);
    if (solution.status == SolveStatus::Infeasible) return std::nullopt;
    if (solution.status != SolveStatus::Optimal)
        throw SolverError("certificate LP did not solve to optimality");

    if (is_strict(query.sense)) {
        const double optimum = solution.objective_value;
        const bool satisfied =
            query.sense == Sense::Gt ? optimum > query.threshold : optimum < query.threshold;
        if (!satisfied) return std::nullopt;
    }
    return Certificate{kind, std::move(solution.values), query};
}

CheckReport check_certificate(const ReachabilityForm& rf, const PropertyQuery& query,
                              const std::vector<double>& vector, double tolerance) {
    if (tolerance < 0.0) throw ValidationError("tolerance must be nonnegative");
    const CertificateKind kind = kind_for(query);
    const int dim = vector_dimension(rf, kind);
    if (static_cast<int>(vector.size()) != dim)
        throw DimensionError("certificate vector has length " + std::to_string(vector.size()) +
                             ", expected " + std::to_string(dim));

    CheckReport report;
    const bool lower = is_lower_bound(query.sense);
    auto violate = [&](CheckReport::RowKind k, int index, double residual) {
        report.violations.push_back({k, index, residual});
    };

    if (kind == CertificateKind::StateVector) {
        Eigen::VectorXd z(dim);
        for (int i = 0; i < dim; ++i) z(i) = vector[i];
        Eigen::VectorXd az = rf.matrix_A * z;
        for (int r = 0; r < az.size(); ++r) {
            double residual = lower ? az(r) - rf.to_goal(r) : rf.to_goal(r) - az(r);
            if (residual > tolerance)
                violate(CheckReport::RowKind::Constraint, r, residual - tolerance);
        }
        const double at_initial = vector[rf.initial];
        double slack = lower ? at_initial + tolerance - query.threshold
                             : query.threshold - (at_initial - tolerance);
        bool ok = is_strict(query.sense) ? slack > 0.0 : slack >= 0.0;
        if (!ok) violate(CheckReport::RowKind::Threshold, -1, -slack);
    } else {
        Eigen::VectorXd y(dim);
        for (int i = 0; i < dim; ++i) y(i) = vector[i];
        Eigen::VectorXd ya = rf.matrix_A.transpose() * y;
        for (int t = 0; t < ya.size(); ++t) {
            double delta = t == rf.initial ? 1.0 : 0.0;
            double residual = lower ? ya(t) - delta : delta - ya(t);
            if (residual > tolerance)
                violate(CheckReport::RowKind::Constraint, t, residual - tolerance);
        }
        const double yb = rf.to_goal.dot(y);
        double slack =
            lower ? yb + tolerance - query.threshold : query.threshold - (yb - tolerance);
        bool ok = is_strict(query.sense) ? slack > 0.0 : slack >= 0.0;
        if (!ok) violate(CheckReport::RowKind::Threshold, -1, -slack);
    }
    for (int i = 0; i < dim; ++i)
        if (vector[i] < -tolerance)
            violate(CheckReport::RowKind::Nonnegativity, i, -(vector[i] + tolerance));

    report.ok = report.violations.empty();
    return report;
}

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string write_certificate(const Certificate& certificate, const std::string& model_digest) {
    std::ostringstream out;
    out << "farkas-certificate kind="
        << (certificate.kind == CertificateKind::StateVector ? "state" : "pair")
        << " mode=" << model::to_string(certificate.query.mode)
        << " sense=" << to_string(certificate.query.sense)
        << " lambda=" << format_value(certificate.query.threshold) << " digest=" << model_digest
        << " dim=" << certificate.values.size() << '\n';
    for (std::size_t i = 0; i < certificate.values.size(); ++i)
        if (certificate.values[i] != 0.0)
            out << i << ' ' << format_value(certificate.values[i]) << '\n';
    return out.str();
}

ParsedCertificate read_certificate(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    ParsedCertificate parsed;
    long dim = -1;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream tokens(line);
        if (!have_header) {
            std::string tag;
            tokens >> tag;
            if (tag != "farkas-certificate")
                throw SyntaxError("expected a farkas-certificate header", lineno);
            std::string kv;
            std::string kind, mode, sense, lambda, digest, dimtext;
            while (tokens >> kv) {
                auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw SyntaxError("malformed header field '" + kv + "'", lineno);
                std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
                if (key == "kind") kind = value;
                else if (key == "mode") mode = value;
                else if (key == "sense") sense = value;
                else if (key == "lambda") lambda = value;
                else if (key == "digest") digest = value;
                else if (key == "dim") dimtext = value;
                else throw SyntaxError("unknown header field '" + key + "'", lineno);
            }
            if (kind != "state" && kind != "pair")
                throw SyntaxError("certificate kind must be 'state' or 'pair'", lineno);
            parsed.certificate.kind =
                kind == "state" ? CertificateKind::StateVector : CertificateKind::PairVector;
            if (mode == "min") parsed.certificate.query.mode = Mode::Min;
            else if (mode == "max") parsed.certificate.query.mode = Mode::Max;
            else throw SyntaxError("certificate mode must be 'min' or 'max'", lineno);
            auto s = sense_from_string(sense);
            if (!s) throw SyntaxError("unknown certificate sense '" + sense + "'", lineno);
            parsed.certificate.query.sense = *s;
            try {
                parsed.certificate.query.threshold = std::stod(lambda);
                dim = std::stol(dimtext);
            } catch (const std::exception&) {
                throw SyntaxError("malformed lambda or dim field", lineno);
            }
            if (dim < 0) throw SyntaxError("negative certificate dimension", lineno);
            parsed.model_digest = digest;
            parsed.certificate.values.assign(dim, 0.0);
            have_header = true;
            continue;
        }
        long index;
        double value;
        if (!(tokens >> index >> value))
            throw SyntaxError("expected '<index> <value>'", lineno);
        if (index < 0 || index >= dim)
            throw SyntaxError("certificate entry index out of range", lineno);
        parsed.certificate.values[index] = value;
    }
    if (!have_header) throw SyntaxError("certificate text is empty");
    return parsed;
}

} // namespace witness::certify
