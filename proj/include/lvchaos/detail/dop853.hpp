#pragma once

// Dormand-Prince 8(5,3) explicit Runge-Kutta pair with 7th-order dense
// output, after Hairer & Wanner's DOP853. Specialized to planar systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>

#include "lvchaos/errors.hpp"

namespace lvchaos::detail {

using State2 = std::array<double, 2>;

struct StepperOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_max = 0.0;  // 0 = unbounded
  std::size_t max_steps = 50'000'000;
};

template <class Rhs>
class Dop853 {
 public:
  Dop853(Rhs f, double t0, const State2& y0, const StepperOptions& opt)
      : f_(std::move(f)), opt_(opt), t_(t0), y_(y0) {
    k1_ = f_(t_, y_);
  }

  double t() const { return t_; }
  const State2& y() const { return y_; }
  double t_prev() const { return t_old_; }
  const State2& y_prev() const { return y_old_; }
  double last_step() const { return h_done_; }
  std::size_t accepted() const { return n_accepted_; }

  // Takes one accepted step towards t_end without passing it. The veto
  // predicate sees the old and proposed new state and may force a retry with
  // half the step. Returns false once t_end has been reached.
  template <class Veto>
  bool step(double t_end, Veto&& veto) {
    if (t_ >= t_end) return false;
    if (h_ <= 0.0) h_ = initial_step(t_end - t_);
    bool rejected = false;
    while (true) {
      if (n_steps_++ > opt_.max_steps) throw StepFailure("step budget exhausted");
      bool last = false;
      double h = h_;
      if (opt_.h_max > 0.0) h = std::min(h, opt_.h_max);
      if (t_ + 1.01 * h >= t_end) {
        h = t_end - t_;
        last = true;
      }
      if (!(0.1 * h > std::abs(t_) * 2.3e-16) || h < 1e-300) {
        throw StepFailure("step size underflow at t=" + std::to_string(t_));
      }
      State2 y_new;
      const double err = h * attempt(h, y_new);
      const double fac11 = std::pow(err, 1.0 / 8.0);
      const double fac = std::max(1.0 / 6.0, std::min(3.0, fac11 / 0.9));
      double h_next = h / fac;
      if (err <= 1.0 && std::isfinite(y_new[0]) && std::isfinite(y_new[1]) && veto(y_, y_new)) {
        t_old_ = t_;
        y_old_ = y_;
        h_done_ = h;
        fnew_ = f_(t_ + h, y_new);
        t_ = last ? t_end : t_ + h;
        y_ = y_new;
        k1_old_ = k1_;
        k1_ = fnew_;
        dense_ready_ = false;
        ++n_accepted_;
        if (rejected) h_next = std::min(h_next, h);
        if (!last) h_ = h_next;
        return true;
      }
      rejected = true;
      if (err > 1.0 || !std::isfinite(err)) {
        h_ = h / std::min(3.0, (std::isfinite(fac11) ? fac11 : 1e3) / 0.9);
      } else {
        h_ = 0.5 * h;  // vetoed
      }
    }
  }

  bool step(double t_end) {
    return step(t_end, [](const State2&, const State2&) { return true; });
  }

  // 7th-order interpolant on the last accepted step [t_prev, t].
  State2 dense(double t) {
    if (!dense_ready_) prepare_dense();
    const double s = (t - t_old_) / h_done_;
    const double s1 = 1.0 - s;
    State2 out;
    for (int i = 0; i < 2; ++i) {
      out[i] = rc_[0][i] +
               s * (rc_[1][i] +
                    s1 * (rc_[2][i] +
                          s * (rc_[3][i] +
                               s1 * (rc_[4][i] + s * (rc_[5][i] + s1 * (rc_[6][i] + s * rc_[7][i]))))));
    }
    return out;
  }

 private:
  static State2 axpy(const State2& y, double h, std::initializer_list<std::pair<double, const State2*>> terms) {
    State2 acc{0.0, 0.0};
    for (const auto& [c, k] : terms) {
      acc[0] += c * (*k)[0];
      acc[1] += c * (*k)[1];
    }
    return {y[0] + h * acc[0], y[1] + h * acc[1]};
  }

  double initial_step(double span) {
    double dnf = 0.0, dny = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double sk = opt_.atol + opt_.rtol * std::abs(y_[i]);
      dnf += (k1_[i] / sk) * (k1_[i] / sk);
      dny += (y_[i] / sk) * (y_[i] / sk);
    }
    double hmax = span;
    if (opt_.h_max > 0.0) hmax = std::min(hmax, opt_.h_max);
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, hmax);
    State2 y1{y_[0] + h * k1_[0], y_[1] + h * k1_[1]};
    State2 k2 = f_(t_ + h, y1);
    double der2 = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double sq = (k2[i] - k1_[i]) / (opt_.atol + opt_.rtol * std::abs(y_[i]));
      der2 += sq * sq;
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.125);
    return std::min(100.0 * h, std::min(h1, hmax));
  }

  // One trial step of size h; returns the scaled error norm divided by h.
  double attempt(double h, State2& y_new) {
    constexpr double c2 = 0.526001519587677318785587544488E-01, c3 = 0.789002279381515978178381316732E-01,
                     c4 = 0.118350341907227396726757197510E+00, c5 = 0.281649658092772603273242802490E+00,
                     c6 = 0.333333333333333333333333333333E+00, c7 = 0.25E+00,
                     c8 = 0.307692307692307692307692307692E+00, c9 = 0.651282051282051282051282051282E+00,
                     c10 = 0.6E+00, c11 = 0.857142857142857142857142857142E+00;
    constexpr double b1 = 5.42937341165687622380535766363E-2, b6 = 4.45031289275240888144113950566E0,
                     b7 = 1.89151789931450038304281599044E0, b8 = -5.8012039600105847814672114227E0,
                     b9 = 3.1116436695781989440891606237E-1, b10 = -1.52160949662516078556178806805E-1,
                     b11 = 2.01365400804030348374776537501E-1, b12 = 4.47106157277725905176885569043E-2;
    constexpr double a21 = 5.26001519587677318785587544488E-2, a31 = 1.97250569845378994544595329183E-2,
                     a32 = 5.91751709536136983633785987549E-2, a41 = 2.95875854768068491816892993775E-2,
                     a43 = 8.87627564304205475450678981324E-2, a51 = 2.41365134159266685502369798665E-1,
                     a53 = -8.84549479328286085344864962717E-1, a54 = 9.24834003261792003115737966543E-1,
                     a61 = 3.7037037037037037037037037037E-2, a64 = 1.70828608729473871279604482173E-1,
                     a65 = 1.25467687566822425016691814123E-1, a71 = 3.7109375E-2,
                     a74 = 1.70252211019544039314978060272E-1, a75 = 6.02165389804559606850219397283E-2,
                     a76 = -1.7578125E-2, a81 = 3.70920001185047927108779319836E-2,
                     a84 = 1.70383925712239993810214054705E-1, a85 = 1.07262030446373284651809199168E-1,
                     a86 = -1.53194377486244017527936158236E-2, a87 = 8.27378916381402288758473766002E-3,
                     a91 = 6.24110958716075717114429577812E-1, a94 = -3.36089262944694129406857109825E0,
                     a95 = -8.68219346841726006818189891453E-1, a96 = 2.75920996994467083049415600797E1,
                     a97 = 2.01540675504778934086186788979E1, a98 = -4.34898841810699588477366255144E1,
                     a101 = 4.77662536438264365890433908527E-1, a104 = -2.48811461997166764192642586468E0,
                     a105 = -5.90290826836842996371446475743E-1, a106 = 2.12300514481811942347288949897E1,
                     a107 = 1.52792336328824235832596922938E1, a108 = -3.32882109689848629194453265587E1,
                     a109 = -2.03312017085086261358222928593E-2, a111 = -9.3714243008598732571704021658E-1,
                     a114 = 5.18637242884406370830023853209E0, a115 = 1.09143734899672957818500254654E0,
                     a116 = -8.14978701074692612513997267357E0, a117 = -1.85200656599969598641566180701E1,
                     a118 = 2.27394870993505042818970056734E1, a119 = 2.49360555267965238987089396762E0,
                     a1110 = -3.0467644718982195003823669022E0, a121 = 2.27331014751653820792359768449E0,
                     a124 = -1.05344954667372501984066689879E1, a125 = -2.00087205822486249909675718444E0,
                     a126 = -1.79589318631187989172765950534E1, a127 = 2.79488845294199600508499808837E1,
                     a128 = -2.85899827713502369474065508674E0, a129 = -8.87285693353062954433549289258E0,
                     a1210 = 1.23605671757943030647266201528E1, a1211 = 6.43392746015763530355970484046E-1;
    constexpr double bhh1 = 0.244094488188976377952755905512E+00, bhh2 = 0.733846688281611857341361741547E+00,
                     bhh3 = 0.220588235294117647058823529412E-01;
    constexpr double er1 = 0.1312004499419488073250102996E-01, er6 = -0.1225156446376204440720569753E+01,
                     er7 = -0.4957589496572501915214079952E+00, er8 = 0.1664377182454986536961530415E+01,
                     er9 = -0.3503288487499736816886487290E+00, er10 = 0.3341791187130174790297318841E+00,
                     er11 = 0.8192320648511571246570742613E-01, er12 = -0.2235530786388629525884427845E-01;

    const State2& y = y_;
    const double t = t_;
    const State2& s1 = k1_;
    s2_ = f_(t + c2 * h, axpy(y, h, {{a21, &s1}}));
    s3_ = f_(t + c3 * h, axpy(y, h, {{a31, &s1}, {a32, &s2_}}));
    s4_ = f_(t + c4 * h, axpy(y, h, {{a41, &s1}, {a43, &s3_}}));
    s5_ = f_(t + c5 * h, axpy(y, h, {{a51, &s1}, {a53, &s3_}, {a54, &s4_}}));
    s6_ = f_(t + c6 * h, axpy(y, h, {{a61, &s1}, {a64, &s4_}, {a65, &s5_}}));
    s7_ = f_(t + c7 * h, axpy(y, h, {{a71, &s1}, {a74, &s4_}, {a75, &s5_}, {a76, &s6_}}));
    s8_ = f_(t + c8 * h, axpy(y, h, {{a81, &s1}, {a84, &s4_}, {a85, &s5_}, {a86, &s6_}, {a87, &s7_}}));
    s9_ = f_(t + c9 * h,
             axpy(y, h, {{a91, &s1}, {a94, &s4_}, {a95, &s5_}, {a96, &s6_}, {a97, &s7_}, {a98, &s8_}}));
    s10_ = f_(t + c10 * h, axpy(y, h,
                                {{a101, &s1}, {a104, &s4_}, {a105, &s5_}, {a106, &s6_}, {a107, &s7_},
                                 {a108, &s8_}, {a109, &s9_}}));
    s11_ = f_(t + c11 * h, axpy(y, h,
                                {{a111, &s1}, {a114, &s4_}, {a115, &s5_}, {a116, &s6_}, {a117, &s7_},
                                 {a118, &s8_}, {a119, &s9_}, {a1110, &s10_}}));
    s12_ = f_(t + h, axpy(y, h,
                          {{a121, &s1}, {a124, &s4_}, {a125, &s5_}, {a126, &s6_}, {a127, &s7_}, {a128, &s8_},
                           {a129, &s9_}, {a1210, &s10_}, {a1211, &s11_}}));
    State2 incr;
    for (int i = 0; i < 2; ++i) {
      incr[i] = b1 * s1[i] + b6 * s6_[i] + b7 * s7_[i] + b8 * s8_[i] + b9 * s9_[i] + b10 * s10_[i] +
                b11 * s11_[i] + b12 * s12_[i];
      y_new[i] = y[i] + h * incr[i];
    }
    double err = 0.0, err2 = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double sk = 1.0 / (opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y_new[i])));
      double sq = (incr[i] - bhh1 * s1[i] - bhh2 * s9_[i] - bhh3 * s12_[i]) * sk;
      err2 += sq * sq;
      sq = (er1 * s1[i] + er6 * s6_[i] + er7 * s7_[i] + er8 * s8_[i] + er9 * s9_[i] + er10 * s10_[i] +
            er11 * s11_[i] + er12 * s12_[i]) *
           sk;
      err += sq * sq;
    }
    const double deno = err + 0.01 * err2;
    return err * std::sqrt(1.0 / (deno <= 0.0 ? 2.0 : deno * 2.0));
  }

  void prepare_dense() {
    constexpr double c14 = 0.1E+00, c15 = 0.2E+00, c16 = 0.777777777777777777777777777778E+00;
    constexpr double a141 = 5.61675022830479523392909219681E-2, a147 = 2.53500210216624811088794765333E-1,
                     a148 = -2.46239037470802489917441475441E-1, a149 = -1.24191423263816360469010140626E-1,
                     a1410 = 1.5329179827876569731206322685E-1, a1411 = 8.20105229563468988491666602057E-3,
                     a1412 = 7.56789766054569976138603589584E-3, a1413 = -8.298E-3;
    constexpr double a151 = 3.18346481635021405060768473261E-2, a156 = 2.83009096723667755288322961402E-2,
                     a157 = 5.35419883074385676223797384372E-2, a158 = -5.49237485713909884646569340306E-2,
                     a1511 = -1.08347328697249322858509316994E-4, a1512 = 3.82571090835658412954920192323E-4,
                     a1513 = -3.40465008687404560802977114492E-4, a1514 = 1.41312443674632500278074618366E-1;
    constexpr double a161 = -4.28896301583791923408573538692E-1, a166 = -4.69762141536116384314449447206E0,
                     a167 = 7.68342119606259904184240953878E0, a168 = 4.06898981839711007970213554331E0,
                     a169 = 3.56727187455281109270669543021E-1, a1613 = -1.39902416515901462129418009734E-3,
                     a1614 = 2.9475147891527723389556272149E0, a1615 = -9.15095847217987001081870187138E0;
    constexpr double d41 = -0.84289382761090128651353491142E+01, d46 = 0.56671495351937776962531783590E+00,
                     d47 = -0.30689499459498916912797304727E+01, d48 = 0.23846676565120698287728149680E+01,
                     d49 = 0.21170345824450282767155149946E+01, d410 = -0.87139158377797299206789907490E+00,
                     d411 = 0.22404374302607882758541771650E+01, d412 = 0.63157877876946881815570249290E+00,
                     d413 = -0.88990336451333310820698117400E-01, d414 = 0.18148505520854727256656404962E+02,
                     d415 = -0.91946323924783554000451984436E+01, d416 = -0.44360363875948939664310572000E+01;
    constexpr double d51 = 0.10427508642579134603413151009E+02, d56 = 0.24228349177525818288430175319E+03,
                     d57 = 0.16520045171727028198505394887E+03, d58 = -0.37454675472269020279518312152E+03,
                     d59 = -0.22113666853125306036270938578E+02, d510 = 0.77334326684722638389603898808E+01,
                     d511 = -0.30674084731089398182061213626E+02, d512 = -0.93321305264302278729567221706E+01,
                     d513 = 0.15697238121770843886131091075E+02, d514 = -0.31139403219565177677282850411E+02,
                     d515 = -0.93529243588444783865713862664E+01, d516 = 0.35816841486394083752465898540E+02;
    constexpr double d61 = 0.19985053242002433820987653617E+02, d66 = -0.38703730874935176555105901742E+03,
                     d67 = -0.18917813819516756882830838328E+03, d68 = 0.52780815920542364900561016686E+03,
                     d69 = -0.11573902539959630126141871134E+02, d610 = 0.68812326946963000169666922661E+01,
                     d611 = -0.10006050966910838403183860980E+01, d612 = 0.77771377980534432092869265740E+00,
                     d613 = -0.27782057523535084065932004339E+01, d614 = -0.60196695231264120758267380846E+02,
                     d615 = 0.84320405506677161018159903784E+02, d616 = 0.11992291136182789328035130030E+02;
    constexpr double d71 = -0.25693933462703749003312586129E+02, d76 = -0.15418974869023643374053993627E+03,
                     d77 = -0.23152937917604549567536039109E+03, d78 = 0.35763911791061412378285349910E+03,
                     d79 = 0.93405324183624310003907691704E+02, d710 = -0.37458323136451633156875139351E+02,
                     d711 = 0.10409964950896230045147246184E+03, d712 = 0.29840293426660503123344363579E+02,
                     d713 = -0.43533456590011143754432175058E+02, d714 = 0.96324553959188282948394950600E+02,
                     d715 = -0.39177261675615439165231486172E+02, d716 = -0.14972683625798562581422125276E+03;

    const double h = h_done_;
    const double t = t_old_;
    const State2& y = y_old_;
    const State2& s1 = k1_old_;
    const State2& fn = fnew_;
    for (int i = 0; i < 2; ++i) {
      const double ydiff = y_[i] - y[i];
      const double bspl = h * s1[i] - ydiff;
      rc_[0][i] = y[i];
      rc_[1][i] = ydiff;
      rc_[2][i] = bspl;
      rc_[3][i] = ydiff - h * fn[i] - bspl;
    }
    const State2 s14 = f_(t + c14 * h, axpy(y, h,
                                            {{a141, &s1}, {a147, &s7_}, {a148, &s8_}, {a149, &s9_},
                                             {a1410, &s10_}, {a1411, &s11_}, {a1412, &s12_}, {a1413, &fn}}));
    const State2 s15 = f_(t + c15 * h, axpy(y, h,
                                            {{a151, &s1}, {a156, &s6_}, {a157, &s7_}, {a158, &s8_},
                                             {a1511, &s11_}, {a1512, &s12_}, {a1513, &fn}, {a1514, &s14}}));
    const State2 s16 = f_(t + c16 * h, axpy(y, h,
                                            {{a161, &s1}, {a166, &s6_}, {a167, &s7_}, {a168, &s8_},
                                             {a169, &s9_}, {a1613, &fn}, {a1614, &s14}, {a1615, &s15}}));
    for (int i = 0; i < 2; ++i) {
      rc_[4][i] = h * (d41 * s1[i] + d46 * s6_[i] + d47 * s7_[i] + d48 * s8_[i] + d49 * s9_[i] +
                       d410 * s10_[i] + d411 * s11_[i] + d412 * s12_[i] + d413 * fn[i] + d414 * s14[i] +
                       d415 * s15[i] + d416 * s16[i]);
      rc_[5][i] = h * (d51 * s1[i] + d56 * s6_[i] + d57 * s7_[i] + d58 * s8_[i] + d59 * s9_[i] +
                       d510 * s10_[i] + d511 * s11_[i] + d512 * s12_[i] + d513 * fn[i] + d514 * s14[i] +
                       d515 * s15[i] + d516 * s16[i]);
      rc_[6][i] = h * (d61 * s1[i] + d66 * s6_[i] + d67 * s7_[i] + d68 * s8_[i] + d69 * s9_[i] +
                       d610 * s10_[i] + d611 * s11_[i] + d612 * s12_[i] + d613 * fn[i] + d614 * s14[i] +
                       d615 * s15[i] + d616 * s16[i]);
      rc_[7][i] = h * (d71 * s1[i] + d76 * s6_[i] + d77 * s7_[i] + d78 * s8_[i] + d79 * s9_[i] +
                       d710 * s10_[i] + d711 * s11_[i] + d712 * s12_[i] + d713 * fn[i] + d714 * s14[i] +
                       d715 * s15[i] + d716 * s16[i]);
    }
    dense_ready_ = true;
  }

  Rhs f_;
  StepperOptions opt_;
  double t_;
  State2 y_;
  double h_ = 0.0;
  double t_old_ = 0.0;
  State2 y_old_{};
  double h_done_ = 0.0;
  State2 k1_{}, k1_old_{}, fnew_{};
  State2 s2_{}, s3_{}, s4_{}, s5_{}, s6_{}, s7_{}, s8_{}, s9_{}, s10_{}, s11_{}, s12_{};
  std::array<State2, 8> rc_{};
  bool dense_ready_ = false;
  std::size_t n_steps_ = 0;
  std::size_t n_accepted_ = 0;
};

}  // namespace lvchaos::detail
