//! sRGB parsing, sRGB to CIELAB (D65) conversion and the CIEDE2000 color difference.

#![allow(clippy::many_single_char_names)]

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }

    /// Parses `#rgb`, `#rgba`, `#rrggbb`, `#rrggbbaa`, `rgb(...)`, `rgba(...)`
    /// and a small set of named colors. Alpha is ignored. `None` for
    /// `transparent` and anything unrecognised.
    pub fn parse_css(text: &str) -> Option<Rgb> {
        let t = text.trim().to_ascii_lowercase();
        if let Some(hex) = t.strip_prefix('#') {
            return parse_hex(hex);
        }
        if let Some(args) = t
            .strip_prefix("rgba(")
            .or_else(|| t.strip_prefix("rgb("))
            .and_then(|s| s.strip_suffix(')'))
        {
            return parse_rgb_args(args);
        }
        named(&t)
    }
}

fn parse_hex(hex: &str) -> Option<Rgb> {
    if !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let nibble = |i: usize| u8::from_str_radix(&hex[i..=i], 16).ok().map(|v| v * 17);
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
    match hex.len() {
        3 | 4 => Some(Rgb::new(nibble(0)?, nibble(1)?, nibble(2)?)),
        6 | 8 => Some(Rgb::new(byte(0)?, byte(2)?, byte(4)?)),
        _ => None,
    }
}

fn parse_rgb_args(args: &str) -> Option<Rgb> {
    let parts: Vec<&str> = args
        .split(|c: char| c == ',' || c == '/' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() < 3 {
        return None;
    }
    let channel = |s: &str| -> Option<u8> {
        let v = if let Some(p) = s.strip_suffix('%') {
            p.parse::<f64>().ok()? * 2.55
        } else {
            s.parse::<f64>().ok()?
        };
        v.is_finite().then(|| v.round().clamp(0.0, 255.0) as u8)
    };
    Some(Rgb::new(channel(parts[0])?, channel(parts[1])?, channel(parts[2])?))
}

fn named(name: &str) -> Option<Rgb> {
    let rgb = match name {
        "black" => Rgb::new(0, 0, 0),
        "white" => Rgb::new(255, 255, 255),
        "red" => Rgb::new(255, 0, 0),
        "green" => Rgb::new(0, 128, 0),
        "lime" => Rgb::new(0, 255, 0),
        "blue" => Rgb::new(0, 0, 255),
        "yellow" => Rgb::new(255, 255, 0),
        "orange" => Rgb::new(255, 165, 0),
        "purple" => Rgb::new(128, 0, 128),
        "gray" | "grey" => Rgb::new(128, 128, 128),
        "silver" => Rgb::new(192, 192, 192),
        "navy" => Rgb::new(0, 0, 128),
        "teal" => Rgb::new(0, 128, 128),
        "maroon" => Rgb::new(128, 0, 0),
        _ => return None,
    };
    Some(rgb)
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rgb::parse_css(s).ok_or_else(|| format!("unrecognised color {s:?}"))
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

// D65 reference white, 2° observer.
const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn srgb_to_lab(c: Rgb) -> Lab {
    let r = srgb_to_linear(c.r as f64 / 255.0);
    let g = srgb_to_linear(c.g as f64 / 255.0);
    let b = srgb_to_linear(c.b as f64 / 255.0);

    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);
    Lab::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

fn hue_degrees(b: f64, a_prime: f64) -> f64 {
    if a_prime == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a_prime).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// CIEDE2000 color difference with kL = kC = kH = 1.
pub fn ciede2000(x: Lab, y: Lab) -> f64 {
    const POW25_7: f64 = 6_103_515_625.0;

    let c1 = x.a.hypot(x.b);
    let c2 = y.a.hypot(y.b);
    let c_bar7 = ((c1 + c2) / 2.0).powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + POW25_7)).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);
    let h1p = hue_degrees(x.b, a1p);
    let h2p = hue_degrees(y.b, a2p);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let chroma_product = c1p * c2p;
    let dh = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let big_dh = 2.0 * chroma_product.sqrt() * (dh.to_radians() / 2.0).sin();

    let l_bar = (x.l + y.l) / 2.0;
    let c_bar_p = (c1p + c2p) / 2.0;
    let h_bar = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (h_bar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * h_bar).to_radians().cos()
        + 0.32 * (3.0 * h_bar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * h_bar - 63.0).to_radians().cos();

    let l50 = (l_bar - 50.0).powi(2);
    let sl = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let sc = 1.0 + 0.045 * c_bar_p;
    let sh = 1.0 + 0.015 * c_bar_p * t;

    let d_theta = 30.0 * (-((h_bar - 275.0) / 25.0).powi(2)).exp();
    let cp7 = c_bar_p.powi(7);
    let rc = 2.0 * (cp7 / (cp7 + POW25_7)).sqrt();
    let rt = -(2.0 * d_theta).to_radians().sin() * rc;

    let tl = dl / sl;
    let tc = dc / sc;
    let th = big_dh / sh;
    (tl * tl + tc * tc + th * th + rt * tc * th).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIRS: &str = include_str!("../../tests/fixtures/ciede2000_pairs.csv");

    #[test]
    fn published_verification_pairs() {
        let mut n = 0;
        for line in PAIRS.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            let d = ciede2000(Lab::new(v[0], v[1], v[2]), Lab::new(v[3], v[4], v[5]));
            assert!((d - v[6]).abs() < 1e-4, "row {n}: got {d}, want {}", v[6]);
            n += 1;
        }
        assert_eq!(n, 34);
    }

    #[test]
    fn reference_points() {
        let white = srgb_to_lab(Rgb::WHITE);
        assert!((white.l - 100.0).abs() < 1e-4);
        assert!(white.a.abs() < 0.01 && white.b.abs() < 0.01);
        assert_eq!(srgb_to_lab(Rgb::BLACK), Lab::new(0.0, 0.0, 0.0));

        // skimage.color.rgb2lab, D65 / 2°.
        let oracle = [
            (Rgb::new(255, 0, 0), (53.2405879437449, 80.0923082256922, 67.2027510444287)),
            (Rgb::new(0, 128, 255), (54.7145387915421, 18.773463797434996, -70.91376436569962)),
        ];
        for (rgb, (l, a, b)) in oracle {
            let lab = srgb_to_lab(rgb);
            assert!((lab.l - l).abs() < 5e-3, "{rgb}: L {}", lab.l);
            assert!((lab.a - a).abs() < 5e-3, "{rgb}: a {}", lab.a);
            assert!((lab.b - b).abs() < 5e-3, "{rgb}: b {}", lab.b);
        }
    }

    #[test]
    fn black_white_is_one_hundred() {
        let d = ciede2000(srgb_to_lab(Rgb::BLACK), srgb_to_lab(Rgb::WHITE));
        assert!((d - 100.0).abs() < 1e-3, "{d}");
        assert_eq!(ciede2000(Lab::new(0.0, 0.0, 0.0), Lab::new(100.0, 0.0, 0.0)), 100.0);
    }

    #[test]
    fn css_color_forms() {
        assert_eq!(Rgb::parse_css("#ff0000"), Some(Rgb::new(255, 0, 0)));
        assert_eq!(Rgb::parse_css("#F00"), Some(Rgb::new(255, 0, 0)));
        assert_eq!(Rgb::parse_css("#11223380"), Some(Rgb::new(0x11, 0x22, 0x33)));
        assert_eq!(Rgb::parse_css("rgb(1, 2, 3)"), Some(Rgb::new(1, 2, 3)));
        assert_eq!(Rgb::parse_css("rgba(10,20,30,0.5)"), Some(Rgb::new(10, 20, 30)));
        assert_eq!(Rgb::parse_css("rgb(255 0 0 / 50%)"), Some(Rgb::new(255, 0, 0)));
        assert_eq!(Rgb::parse_css("White"), Some(Rgb::WHITE));
        assert_eq!(Rgb::parse_css("transparent"), None);
        assert_eq!(Rgb::parse_css("#12"), None);
        assert_eq!(Rgb::new(1, 171, 255).to_hex(), "#01abff");
    }
}
