#include "qsdcert/spec_json.hpp"

#include <json.hpp>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
    throw Error(ErrorCode::ParseError, pointer + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& at) {
    if (!obj.is_object()) fail(at.empty() ? "/" : at, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(at + "/" + key, "missing key");
    return *it;
}

double number(const json& v, const std::string& at) {
    if (!v.is_number()) fail(at, "expected a number");
    return v.get<double>();
}

std::vector<double> numbers(const json& v, const std::string& at) {
    if (!v.is_array()) fail(at, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], at + "/" + std::to_string(i)));
    return out;
}

Box parse_box(const json& domain, const std::string& at) {
    Box b{numbers(require(domain, "lo", at), at + "/lo"), numbers(require(domain, "hi", at), at + "/hi")};
    if (b.lo.size() != b.hi.size()) fail(at + "/hi", "length differs from lo");
    if (b.lo.empty() || b.lo.size() > kMaxDim) fail(at + "/lo", "dimension must be 1..4");
    return b;
}

Drift parse_drift(const json& r, const std::string& at) {
    if (!r.is_object()) fail(at, "expected an object");
    if (r.contains("v")) return ConstantDrift{numbers(r["v"], at + "/v")};
    if (r.contains("poly")) {
        auto c = numbers(r["poly"], at + "/poly");
        if (c.empty()) fail(at + "/poly", "needs at least one coefficient");
        return PolynomialDrift{std::move(c)};
    }
    if (r.contains("table")) {
        const json& t = r["table"];
        return TabulatedDrift{numbers(require(t, "x", at + "/table"), at + "/table/x"),
                              numbers(require(t, "v", at + "/table"), at + "/table/v")};
    }
    fail(at, "regime needs one of v, poly, table");
}

Matrix parse_rates(const json& v, std::size_t n, const std::string& at) {
    if (!v.is_array() || v.size() != n) fail(at, "expected " + std::to_string(n) + " rows");
    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = numbers(v[i], at + "/" + std::to_string(i));
        if (row.size() != n) fail(at + "/" + std::to_string(i), "expected " + std::to_string(n) + " entries");
        for (std::size_t j = 0; j < n; ++j) q(i, j) = row[j];
    }
    return q;
}

}  // namespace

ProcessSpec parse_spec(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
    }
    const json& mode_v = require(root, "mode", "");
    if (!mode_v.is_string()) fail("/mode", "expected a string");
    const std::string mode = mode_v.get<std::string>();

    if (mode == "neutron") {
        NeutronSpec s;
        const json& domain = require(root, "domain", "");
        const std::string shape = domain.is_object() && domain.contains("shape") && domain["shape"].is_string()
                                      ? domain["shape"].get<std::string>()
                                      : "box";
        if (shape == "disk") {
            Disk d;
            if (domain.contains("center")) {
                const auto c = numbers(domain["center"], "/domain/center");
                if (c.size() != 2) fail("/domain/center", "expected two coordinates");
                d.center = {c[0], c[1]};
            }
            d.radius = number(require(domain, "radius", "/domain"), "/domain/radius");
            s.domain = d;
        } else if (shape == "box") {
            s.domain = parse_box(domain, "/domain");
        } else {
            fail("/domain/shape", "expected \"disk\" or \"box\"");
        }
        if (root.contains("scatter_rate")) s.scatter_rate = number(root["scatter_rate"], "/scatter_rate");
        return s;
    }

    PdmpSpec s;
    if (mode == "pcmp") s.mode = PdmpMode::Pcmp;
    else if (mode == "pdmp1d") s.mode = PdmpMode::General1d;
    else fail("/mode", "expected \"pcmp\", \"pdmp1d\" or \"neutron\"");

    s.domain = parse_box(require(root, "domain", ""), "/domain");
    if (root.contains("dim")) {
        const json& d = root["dim"];
        if (!d.is_number_integer() || d.get<std::int64_t>() != static_cast<std::int64_t>(s.dim()))
            fail("/dim", "does not match the domain dimension " + std::to_string(s.dim()));
    }
    const json& regimes = require(root, "regimes", "");
    if (!regimes.is_array() || regimes.empty()) fail("/regimes", "expected a nonempty array");
    for (std::size_t i = 0; i < regimes.size(); ++i)
        s.regimes.push_back(parse_drift(regimes[i], "/regimes/" + std::to_string(i)));
    s.rates = JumpRates::from_generator(parse_rates(require(root, "rates", ""), s.regimes.size(), "/rates"));
    if (root.contains("step")) s.step = number(root["step"], "/step");
    if (root.contains("step_tolerance")) s.step_tolerance = number(root["step_tolerance"], "/step_tolerance");
    return s;
}

std::string spec_to_json(const ProcessSpec& spec) {
    nlohmann::ordered_json j;
    if (const auto* n = std::get_if<NeutronSpec>(&spec)) {
        j["mode"] = "neutron";
        if (const auto* d = std::get_if<Disk>(&n->domain)) {
            j["domain"] = {{"shape", "disk"}, {"center", d->center}, {"radius", d->radius}};
        } else {
            const Box& b = std::get<Box>(n->domain);
            j["domain"] = {{"shape", "box"}, {"lo", b.lo}, {"hi", b.hi}};
        }
        j["scatter_rate"] = n->scatter_rate;
        return j.dump(2) + "\n";
    }
    const auto& p = std::get<PdmpSpec>(spec);
    j["mode"] = p.mode == PdmpMode::Pcmp ? "pcmp" : "pdmp1d";
    j["dim"] = p.dim();
    j["domain"] = {{"lo", p.domain.lo}, {"hi", p.domain.hi}};
    j["regimes"] = nlohmann::ordered_json::array();
    for (const Drift& d : p.regimes) {
        if (const auto* c = std::get_if<ConstantDrift>(&d)) j["regimes"].push_back({{"v", c->v}});
        else if (const auto* q = std::get_if<PolynomialDrift>(&d)) j["regimes"].push_back({{"poly", q->coefficients}});
        else {
            const auto& t = std::get<TabulatedDrift>(d);
            j["regimes"].push_back({{"table", {{"x", t.x}, {"v", t.v}}}});
        }
    }
    const Matrix q = p.rates.generator();
    std::vector<std::vector<double>> rows(q.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) rows[i].assign(q.row(i).begin(), q.row(i).end());
    j["rates"] = rows;
    if (p.step > 0.0) j["step"] = p.step;
    j["step_tolerance"] = p.step_tolerance;
    return j.dump(2) + "\n";
}

}  // namespace qsdcert
