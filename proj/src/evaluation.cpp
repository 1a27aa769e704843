#include <chrono>
#include <fstream>

#include "hdcg/errors.hpp"
#include "hdcg/metrics.hpp"

namespace hdcg {

MetricRow evaluate_method(const std::string& method, const std::vector<EvalPair>& pairs, const Denoiser& denoiser,
                          const EvalOptions& opt) {
    if (pairs.empty()) throw DataError("evaluation needs at least one pair");
    MetricRow row;
    row.method = method;
    for (const auto& pair : pairs) {
        SampleMetrics s;
        s.source_id = pair.hn.source_id();
        const BScan den = denoiser(pair.hn);
        if (den.height() != pair.reference.height() || den.width() != pair.reference.width())
            throw ShapeError("denoised image does not match the reference shape");
        s.shift = register_translation(pair.reference, den, opt.subpixel);
        const Image aligned = apply_shift(den.pixels(), s.shift.dy, s.shift.dx);
        const Region r = valid_overlap(den.height(), den.width(), s.shift.dy, s.shift.dx);
        const Image a = crop(aligned, r), b = crop(pair.reference.pixels(), r);
        s.psnr = psnr(a, b);
        s.ssim = ssim(a, b);
        try {
            const MaskPair masks = extract_masks(den, opt.masks);
            s.cnr = cnr(den.pixels(), masks.signal, masks.background);
            s.msr = msr(den.pixels(), masks.signal);
        } catch (const MaskExtractionError& e) {
            s.excluded = true;
            s.reason = e.what();
            ++row.excluded;
        }
        row.samples.push_back(std::move(s));
    }
    std::vector<double> c, m, p, q;
    for (const auto& s : row.samples) {
        if (s.excluded) continue;
        c.push_back(s.cnr);
        m.push_back(s.msr);
        p.push_back(s.psnr);
        q.push_back(s.ssim);
    }
    row.n = static_cast<int>(c.size());
    if (row.n == 0) throw DataError("mask extraction failed for every sample of '" + method + "'");
    row.cnr = mean_std(c);
    row.msr = mean_std(m);
    row.psnr = mean_std(p);
    row.ssim = mean_std(q);
    return row;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(17);
    out << "method,cnr_mean,cnr_std,msr_mean,msr_std,psnr_mean,psnr_std,ssim_mean,ssim_std,n,excluded\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.cnr.mean << ',' << r.cnr.std << ',' << r.msr.mean << ',' << r.msr.std << ','
            << r.psnr.mean << ',' << r.psnr.std << ',' << r.ssim.mean << ',' << r.ssim.std << ',' << r.n << ','
            << r.excluded << '\n';
}

void MetricReport::write_samples_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(17);
    out << "method,source_id,cnr,msr,psnr,ssim,shift_dy,shift_dx,excluded\n";
    for (const auto& r : rows)
        for (const auto& s : r.samples)
            out << r.method << ',' << s.source_id << ',' << s.cnr << ',' << s.msr << ',' << s.psnr << ',' << s.ssim
                << ',' << s.shift.dy << ',' << s.shift.dx << ',' << (s.excluded ? 1 : 0) << '\n';
}

RuntimeReport benchmark_runtime(const std::vector<TimedMethod>& methods, const std::vector<BScan>& images, int repeats,
                                const std::string& device) {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (images.empty()) throw DataError("runtime benchmark needs at least one image");
    RuntimeReport report;
    for (const auto& m : methods) {
        (void)m.run(images.front());
        RuntimeRow row;
        row.method = m.name;
        row.device = device;
        for (int r = 0; r < repeats; ++r)
            for (const auto& img : images) {
                const auto t0 = std::chrono::steady_clock::now();
                const BScan out = m.run(img);
                const auto t1 = std::chrono::steady_clock::now();
                row.times.push_back(std::chrono::duration<double>(t1 - t0).count());
            }
        row.n = static_cast<int>(row.times.size());
        const MeanStd ms = mean_std(row.times);
        row.mean_s = ms.mean;
        row.std_s = ms.std;
        report.rows.push_back(std::move(row));
    }
    return report;
}

void RuntimeReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(9);
    out << "method,device,mean_s,std_s,n\n";
    for (const auto& r : rows) out << r.method << ',' << r.device << ',' << r.mean_s << ',' << r.std_s << ',' << r.n << '\n';
}

}  // namespace hdcg
