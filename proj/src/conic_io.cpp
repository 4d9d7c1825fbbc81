#include <fstream>
#include <sstream>

#include "isac/conic.hpp"
#include "isac/csv.hpp"

namespace isac {

namespace {

void write_vector(std::ostream& os, const char* tag, const RVector& v) {
    os << tag << ' ' << v.size() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v(i)) << '\n';
}

void write_sparse(std::ostream& os, const char* tag, const SparseMatrix& m) {
    os << tag << ' ' << m.rows() << ' ' << m.nonZeros() << '\n';
    for (int col = 0; col < m.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(m, col); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
}

class Reader {
public:
    explicit Reader(const std::string& text) : in_(text) {}

    std::istringstream line(const std::string& expect_tag) {
        std::string l;
        if (!next(l)) fail("unexpected end of file, expected '" + expect_tag + "'");
        std::istringstream ls(l);
        std::string tag;
        ls >> tag;
        if (tag != expect_tag) fail("expected '" + expect_tag + "', found '" + tag + "'");
        return ls;
    }

    double number(const std::string& what) {
        std::string l;
        if (!next(l)) fail("unexpected end of file in " + what);
        try {
            return parse_double_field(trim(l), what);
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }

    bool next(std::string& l) {
        while (std::getline(in_, l)) {
            ++line_no_;
            if (!l.empty() && l.back() == '\r') l.pop_back();
            const auto first = l.find_first_not_of(" \t");
            if (first == std::string::npos || l[first] == '#') continue;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("conic problem file line " + std::to_string(line_no_) + ": " + what);
    }

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        return a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }

private:
    std::istringstream in_;
    int line_no_ = 0;
};

RVector read_vector(Reader& r, const char* tag, Eigen::Index expected) {
    auto ls = r.line(tag);
    Eigen::Index count = -1;
    if (!(ls >> count) || count != expected)
        r.fail(std::string("'") + tag + "' length must be " + std::to_string(expected));
    RVector v(count);
    for (Eigen::Index i = 0; i < count; ++i) v(i) = r.number(tag);
    return v;
}

SparseMatrix read_sparse(Reader& r, const char* tag, int rows, int cols) {
    auto ls = r.line(tag);
    long long declared_rows = -1, nnz = -1;
    if (!(ls >> declared_rows >> nnz) || declared_rows != rows || nnz < 0)
        r.fail(std::string("'") + tag + "' must declare " + std::to_string(rows) + " rows and a nonzero count");
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        std::string l;
        if (!r.next(l)) r.fail(std::string("missing entries of '") + tag + "'");
        std::istringstream es(l);
        long long i = -1, j = -1;
        std::string v;
        if (!(es >> i >> j >> v)) r.fail(std::string("malformed entry of '") + tag + "'");
        if (i < 0 || i >= rows || j < 0 || j >= cols) r.fail(std::string("entry of '") + tag + "' out of range");
        double value = 0.0;
        try {
            value = parse_double_field(v, tag);
        } catch (const ParseError& e) {
            r.fail(e.what());
        }
        trip.emplace_back(static_cast<int>(i), static_cast<int>(j), value);
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

}  // namespace

std::string format_problem(const ConicProblem& p) {
    p.validate();
    std::ostringstream os;
    os << "isac-conic 1\n";
    os << "# minimize c'x s.t. Gx + s = h, Ax = b, s in K\n";
    os << "vars " << p.num_vars() << '\n';
    os << "cones nonneg " << p.cones.nonneg;
    auto list = [&](const char* name, const std::vector<int>& v) {
        os << ' ' << name << ' ' << v.size();
        for (int d : v) os << ' ' << d;
    };
    list("soc", p.cones.soc);
    list("psd", p.cones.psd);
    list("hpsd", p.cones.hpsd);
    os << '\n';
    write_vector(os, "c", p.c);
    write_sparse(os, "G", p.G);
    write_vector(os, "h", p.h);
    write_sparse(os, "A", p.A);
    write_vector(os, "b", p.b);
    os << "end\n";
    return os.str();
}

ConicProblem parse_problem(const std::string& text) {
    Reader r(text);
    {
        auto ls = r.line("isac-conic");
        int version = 0;
        if (!(ls >> version) || version != 1) r.fail("unsupported conic file version");
    }
    ConicProblem p;
    int n = 0;
    {
        auto ls = r.line("vars");
        if (!(ls >> n) || n < 0) r.fail("bad 'vars'");
    }
    {
        auto ls = r.line("cones");
        std::string tag;
        if (!(ls >> tag) || tag != "nonneg" || !(ls >> p.cones.nonneg) || p.cones.nonneg < 0) r.fail("bad 'cones nonneg'");
        for (auto* target : {&p.cones.soc, &p.cones.psd, &p.cones.hpsd}) {
            std::size_t count = 0;
            if (!(ls >> tag >> count)) r.fail("bad cone list");
            for (std::size_t i = 0; i < count; ++i) {
                int d = 0;
                if (!(ls >> d) || d < 1) r.fail("bad cone dimension in '" + tag + "'");
                target->push_back(d);
            }
        }
    }
    const int m = p.cones.rows();
    p.c = read_vector(r, "c", n);
    p.G = read_sparse(r, "G", m, n);
    p.h = read_vector(r, "h", m);
    std::string l;
    {
        // A's row count is whatever it declares; b must agree.
        if (!r.next(l)) r.fail("missing 'A'");
        std::istringstream ls(l);
        std::string tag;
        long long rows = -1, nnz = -1;
        if (!(ls >> tag >> rows >> nnz) || tag != "A" || rows < 0 || nnz < 0) r.fail("bad 'A' header");
        std::ostringstream rebuilt;
        rebuilt << "A " << rows << ' ' << nnz << '\n';
        std::vector<Triplet> trip;
        for (long long k = 0; k < nnz; ++k) {
            if (!r.next(l)) r.fail("missing entries of 'A'");
            std::istringstream es(l);
            long long i = -1, j = -1;
            std::string v;
            if (!(es >> i >> j >> v) || i < 0 || i >= rows || j < 0 || j >= n) r.fail("malformed entry of 'A'");
            double value = 0.0;
            try {
                value = parse_double_field(v, "A");
            } catch (const ParseError& e) {
                r.fail(e.what());
            }
            trip.emplace_back(static_cast<int>(i), static_cast<int>(j), value);
        }
        p.A.resize(rows, n);
        p.A.setFromTriplets(trip.begin(), trip.end());
    }
    p.b = read_vector(r, "b", p.A.rows());
    if (!r.next(l) || Reader::trim(l) != "end") r.fail("missing 'end'");
    try {
        p.validate();
    } catch (const std::exception& e) {
        r.fail(e.what());
    }
    return p;
}

void save_problem(const ConicProblem& problem, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << format_problem(problem);
}

ConicProblem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open conic problem file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

}  // namespace isac
