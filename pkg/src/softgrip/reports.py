"""Self-contained SVG charts (polyline and bar) plus CSV tables for the
pipeline report; no plotting dependency."""

import numpy as np

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 64, 16, 28, 46
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step * 0.5, step)


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.1e}"
    return f"{v:g}"


class SvgChart:
    def __init__(self, title: str, xlabel: str, ylabel: str):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series: list[tuple[str, np.ndarray, np.ndarray]] = []
        self.bars: list[tuple[str, float]] = []
        self.log_y = False

    def add_line(self, label: str, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        self.series.append((label, x[ok], y[ok]))

    def add_bar(self, label: str, value: float):
        self.bars.append((label, float(value)))

    def _y_transform(self, y):
        return np.log10(np.maximum(y, 1e-300)) if self.log_y else y

    def render(self) -> str:
        pw = _W - _ML - _MR
        ph = _H - _MT - _MB
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{_H}" viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{self.title}</text>',
        ]
        if self.bars:
            values = [v for _, v in self.bars]
            lo, hi = 0.0, max(max(values), 1e-12) * 1.1
            ty = self._y_transform
            if self.log_y:
                lo = min(ty(np.array(values))) - 0.5
                hi = max(ty(np.array(values))) + 0.5
            n = len(self.bars)
            bw = pw / (1.5 * n + 0.5)
            for i, (label, v) in enumerate(self.bars):
                vv = ty(np.array([v]))[0] if self.log_y else v
                frac = (vv - lo) / (hi - lo)
                x = _ML + (0.5 + 1.5 * i) * bw
                h = frac * ph
                parts.append(
                    f'<rect x="{x:.1f}" y="{_MT + ph - h:.1f}" '
                    f'width="{bw:.1f}" height="{h:.1f}" '
                    f'fill="{_COLORS[i % len(_COLORS)]}"/>'
                )
                parts.append(
                    f'<text x="{x + bw / 2:.1f}" y="{_H - _MB + 16}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="11">{label}</text>'
                )
                parts.append(
                    f'<text x="{x + bw / 2:.1f}" y="{_MT + ph - h - 4:.1f}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="10">{_fmt(v)}</text>'
                )
            parts.append(
                f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" '
                f'y2="{_MT + ph}" stroke="black"/>'
            )
        elif self.series:
            all_x = np.concatenate([s[1] for s in self.series])
            all_y = self._y_transform(
                np.concatenate([s[2] for s in self.series]))
            if len(all_x) == 0:
                all_x = np.array([0.0, 1.0])
                all_y = np.array([0.0, 1.0])
            x_lo, x_hi = float(all_x.min()), float(all_x.max())
            y_lo, y_hi = float(all_y.min()), float(all_y.max())
            if x_hi <= x_lo:
                x_hi = x_lo + 1
            if y_hi <= y_lo:
                y_hi = y_lo + 1
            pad = 0.05 * (y_hi - y_lo)
            y_lo -= pad
            y_hi += pad

            def sx(x):
                return _ML + (x - x_lo) / (x_hi - x_lo) * pw

            def sy(y):
                return _MT + ph - (y - y_lo) / (y_hi - y_lo) * ph

            for tx in _ticks(x_lo, x_hi):
                parts.append(
                    f'<line x1="{sx(tx):.1f}" y1="{_MT + ph}" '
                    f'x2="{sx(tx):.1f}" y2="{_MT + ph + 4}" stroke="black"/>'
                )
                parts.append(
                    f'<text x="{sx(tx):.1f}" y="{_MT + ph + 17}" '
                    f'text-anchor="middle" font-family="sans-serif" '
                    f'font-size="10">{_fmt(tx)}</text>'
                )
            for tv in _ticks(y_lo, y_hi):
                label = 10 ** tv if self.log_y else tv
                parts.append(
                    f'<line x1="{_ML - 4}" y1="{sy(tv):.1f}" x2="{_ML}" '
                    f'y2="{sy(tv):.1f}" stroke="black"/>'
                )
                parts.append(
                    f'<text x="{_ML - 7}" y="{sy(tv) + 3:.1f}" '
                    f'text-anchor="end" font-family="sans-serif" '
                    f'font-size="10">{_fmt(label)}</text>'
                )
            for i, (label, x, y) in enumerate(self.series):
                yv = self._y_transform(y)
                pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}"
                               for a, b in zip(x, yv))
                color = _COLORS[i % len(_COLORS)]
                parts.append(
                    f'<polyline points="{pts}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
                ly = _MT + 14 + 14 * i
                parts.append(
                    f'<line x1="{_ML + pw - 110}" y1="{ly - 4}" '
                    f'x2="{_ML + pw - 90}" y2="{ly - 4}" stroke="{color}" '
                    f'stroke-width="2"/>'
                )
                parts.append(
                    f'<text x="{_ML + pw - 85}" y="{ly}" '
                    f'font-family="sans-serif" font-size="11">{label}</text>'
                )
            parts.append(
                f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}" '
                f'stroke="black"/>'
            )
            parts.append(
                f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" '
                f'y2="{_MT + ph}" stroke="black"/>'
            )
        parts.append(
            f'<text x="{_ML + pw / 2}" y="{_H - 8}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{self.xlabel}</text>'
        )
        parts.append(
            f'<text x="16" y="{_MT + ph / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {_MT + ph / 2})">{self.ylabel}</text>'
        )
        parts.append("</svg>")
        return "\n".join(parts)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
