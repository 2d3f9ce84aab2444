//! Top-down raster of a scene: an 8 x 7 table grid under a gripper band.
//!
//! Camera images use saturated fills on a wooden table. Goal images use the
//! goal-sketch style: ink outlines with hatching on white paper, so the goal
//! and the observation come from visibly different domains.

use planbench_core::scene::{Category, Color, ObjectDescriptor, Scene, Size, Support, GRID_COLS, GRID_ROWS};
use planbench_core::RenderStyle;

pub const CELL: u32 = 64;
pub const BAND: u32 = 64;
pub const WIDTH: u32 = CELL * GRID_COLS as u32;
pub const HEIGHT: u32 = BAND + CELL * GRID_ROWS as u32;

type Rgb = [u8; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    fn inset(self, d: i32) -> Rect {
        Rect { x: self.x + d, y: self.y + d, w: (self.w - 2 * d).max(2), h: (self.h - 2 * d).max(2) }
    }
}

/// Where one visible object is drawn.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub index: usize,
    pub rect: Rect,
}

fn cell_rect(col: u8, row: u8) -> Rect {
    Rect { x: col as i32 * CELL as i32, y: BAND as i32 + row as i32 * CELL as i32, w: CELL as i32, h: CELL as i32 }
}

fn add_tree(scene: &Scene, i: usize, rect: Rect, depth: usize, out: &mut Vec<Placement>) {
    if scene.is_hidden(i) {
        return;
    }
    out.push(Placement { index: i, rect });
    if depth > scene.len() {
        return;
    }
    // Stacked objects shrink toward the centre; contents share the inner area.
    for j in 0..scene.len() {
        if scene.support(j) == Support::On(i as u16) {
            add_tree(scene, j, rect.inset(6), depth + 1, out);
        }
    }
    let contents: Vec<usize> = scene.contents(i).filter(|&j| !scene.is_hidden(j)).collect();
    let inner = rect.inset(rect.w / 5);
    let n = contents.len() as i32;
    for (k, j) in contents.into_iter().enumerate() {
        let k = k as i32;
        let r = if n == 1 {
            inner.inset(inner.w / 6)
        } else {
            let half = inner.w / 2;
            Rect { x: inner.x + (k % 2) * half, y: inner.y + ((k / 2) % 2) * half, w: half, h: half }
        };
        add_tree(scene, j, r, depth + 1, out);
    }
}

/// Draw order and positions of every visible object.
pub fn layout(scene: &Scene) -> Vec<Placement> {
    let mut out = Vec::new();
    for i in 0..scene.len() {
        let o = &scene.objects()[i];
        match scene.support(i) {
            Support::Table => add_tree(scene, i, cell_rect(o.cell.col, o.cell.row).inset(4), 0, &mut out),
            Support::Held => {
                let r = Rect { x: o.cell.col as i32 * CELL as i32, y: 0, w: CELL as i32, h: BAND as i32 };
                add_tree(scene, i, r.inset(10), 0, &mut out);
            }
            _ => {}
        }
    }
    out
}

fn rgb(c: Color) -> Rgb {
    match c {
        Color::Red => [214, 39, 40],
        Color::Orange => [255, 127, 14],
        Color::Yellow => [240, 210, 30],
        Color::Green => [44, 160, 44],
        Color::Blue => [31, 119, 220],
        Color::Purple => [148, 103, 189],
        Color::Pink => [247, 120, 190],
        Color::Brown => [140, 86, 75],
        Color::Gray => [127, 127, 127],
        Color::White => [245, 245, 245],
    }
}

fn shade(c: Rgb, f: f32) -> Rgb {
    c.map(|v| (v as f32 * f).clamp(0.0, 255.0) as u8)
}

struct Canvas {
    px: Vec<u8>,
}

impl Canvas {
    fn new(bg: Rgb) -> Self {
        let mut px = Vec::with_capacity((WIDTH * HEIGHT * 3) as usize);
        for _ in 0..WIDTH * HEIGHT {
            px.extend_from_slice(&bg);
        }
        Canvas { px }
    }

    fn set(&mut self, x: i32, y: i32, c: Rgb) {
        if x < 0 || y < 0 || x >= WIDTH as i32 || y >= HEIGHT as i32 {
            return;
        }
        let k = ((y as u32 * WIDTH + x as u32) * 3) as usize;
        self.px[k..k + 3].copy_from_slice(&c);
    }

    fn fill(&mut self, r: Rect, c: Rgb) {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                self.set(x, y, c);
            }
        }
    }

    fn outline(&mut self, r: Rect, c: Rgb, t: i32) {
        self.fill(Rect { x: r.x, y: r.y, w: r.w, h: t }, c);
        self.fill(Rect { x: r.x, y: r.y + r.h - t, w: r.w, h: t }, c);
        self.fill(Rect { x: r.x, y: r.y, w: t, h: r.h }, c);
        self.fill(Rect { x: r.x + r.w - t, y: r.y, w: t, h: r.h }, c);
    }

    fn hatch(&mut self, r: Rect, c: Rgb) {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                if (x + y).rem_euclid(6) == 0 {
                    self.set(x, y, c);
                }
            }
        }
    }

    fn disk(&mut self, r: Rect, c: Rgb, ring: Option<i32>) {
        let (cx, cy) = (r.x as f32 + r.w as f32 / 2.0, r.y as f32 + r.h as f32 / 2.0);
        let rad = r.w.min(r.h) as f32 / 2.0;
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                let d = ((x as f32 + 0.5 - cx).powi(2) + (y as f32 + 0.5 - cy).powi(2)).sqrt();
                let hit = match ring {
                    None => d <= rad,
                    Some(t) => d <= rad && d >= rad - t as f32,
                };
                if hit {
                    self.set(x, y, c);
                }
            }
        }
    }

    fn glyph(&mut self, ch: char, r: Rect, c: Rgb) {
        let Some(rows) = glyph_rows(ch) else { return };
        let scale = (r.w / 7).min(r.h / 9).max(1);
        let (gw, gh) = (5 * scale, 7 * scale);
        let (ox, oy) = (r.x + (r.w - gw) / 2, r.y + (r.h - gh) / 2);
        for (ry, bits) in rows.iter().enumerate() {
            for rx in 0..5 {
                if bits & (0b10000 >> rx) != 0 {
                    self.fill(Rect { x: ox + rx * scale, y: oy + ry as i32 * scale, w: scale, h: scale }, c);
                }
            }
        }
    }
}

fn glyph_rows(ch: char) -> Option<[u8; 7]> {
    const FONT: [[u8; 7]; 26] = [
        [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
        [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
        [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110],
        [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
        [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
        [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
        [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
        [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
        [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
        [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
        [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001],
        [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
        [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
        [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
        [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
        [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
        [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
        [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
        [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
        [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
    ];
    let u = ch.to_ascii_uppercase();
    u.is_ascii_uppercase().then(|| FONT[(u as u8 - b'A') as usize])
}

fn draw_camera(cv: &mut Canvas, scene: &Scene, o: &ObjectDescriptor, i: usize, r: Rect) {
    let c = rgb(o.color);
    let edge = shade(c, 0.55);
    match o.category {
        Category::Block => {
            cv.fill(r, c);
            cv.outline(r, edge, 2);
        }
        Category::Bowl => {
            let r = if o.size == Size::Small { r.inset(r.w / 6) } else { r };
            cv.disk(r, shade(c, 0.75), None);
            cv.disk(r, c, Some(r.w / 6));
        }
        Category::Letter => {
            cv.fill(r, [250, 248, 235]);
            cv.outline(r, [60, 60, 60], 1);
            cv.glyph(o.glyph.unwrap_or(' '), r, c);
        }
        Category::Container => {
            if scene.is_open_index(i) {
                cv.fill(r, [40, 30, 25]);
                cv.outline(r, c, 5);
            } else {
                cv.fill(r, c);
                cv.outline(r, edge, 2);
                let handle = Rect { x: r.x + r.w / 3, y: r.y + r.h / 2 - 2, w: r.w / 3, h: 4 };
                cv.fill(handle, [30, 30, 30]);
            }
        }
        Category::Fixture => {
            cv.fill(r, shade(c, 0.9));
            cv.outline(r, [70, 60, 50], 1);
        }
        Category::Misc => {
            let r = if o.size == Size::Small { r.inset(r.w / 5) } else { r };
            cv.disk(r, c, None);
            cv.disk(r, edge, Some(2));
        }
    }
}

fn draw_sketch(cv: &mut Canvas, scene: &Scene, o: &ObjectDescriptor, i: usize, r: Rect) {
    let ink = shade(rgb(o.color), 0.6);
    match o.category {
        Category::Block => {
            cv.hatch(r, ink);
            cv.outline(r, ink, 3);
        }
        Category::Bowl => {
            cv.disk(r, ink, Some(3));
        }
        Category::Letter => {
            cv.outline(r, [20, 20, 20], 1);
            cv.glyph(o.glyph.unwrap_or(' '), r, [20, 20, 20]);
        }
        Category::Container => {
            cv.outline(r, ink, 3);
            if !scene.is_open_index(i) {
                cv.hatch(r, ink);
            }
        }
        Category::Fixture => cv.outline(r, ink, 1),
        Category::Misc => cv.disk(r, ink, Some(3)),
    }
}

/// Raw RGB pixels, row-major.
pub fn render_rgb(scene: &Scene, style: RenderStyle) -> Vec<u8> {
    let mut cv = match style {
        RenderStyle::Camera => Canvas::new([196, 164, 120]),
        RenderStyle::GoalSketch => Canvas::new([255, 255, 255]),
    };
    match style {
        RenderStyle::Camera => cv.fill(Rect { x: 0, y: 0, w: WIDTH as i32, h: BAND as i32 }, [80, 84, 92]),
        RenderStyle::GoalSketch => {
            cv.fill(Rect { x: 0, y: BAND as i32 - 1, w: WIDTH as i32, h: 1 }, [180, 180, 180]);
        }
    }
    for p in layout(scene) {
        let o = &scene.objects()[p.index];
        match style {
            RenderStyle::Camera => draw_camera(&mut cv, scene, o, p.index, p.rect),
            RenderStyle::GoalSketch => draw_sketch(&mut cv, scene, o, p.index, p.rect),
        }
        if scene.support(p.index) == Support::Held {
            let claw = [20, 20, 20];
            let r = p.rect;
            cv.fill(Rect { x: r.x - 4, y: r.y - 6, w: 4, h: r.h / 2 }, claw);
            cv.fill(Rect { x: r.x + r.w, y: r.y - 6, w: 4, h: r.h / 2 }, claw);
        }
    }
    cv.px
}

/// PNG-encoded rendering. Deterministic: equal scenes give equal bytes.
pub fn render_png(scene: &Scene, style: RenderStyle) -> Vec<u8> {
    let px = render_rgb(scene, style);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, WIDTH, HEIGHT);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(&px).expect("in-memory PNG data");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use planbench_core::scene::Cell;

    fn scene() -> Scene {
        Scene::builder()
            .object(ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("block_1", Category::Block, Color::Blue, Cell::new(1, 0)))
            .object(
                ObjectDescriptor::new("drawer_0", Category::Container, Color::Brown, Cell::new(3, 2))
                    .with_noun("drawer"),
            )
            .object(ObjectDescriptor::letter("letter_q", 'Q', Color::Green, Cell::new(5, 6)))
            .inside("block_1", "drawer_0")
            .held("letter_q")
            .build()
            .unwrap()
    }

    #[test]
    fn png_is_deterministic_and_sized() {
        let a = render_png(&scene(), RenderStyle::Camera);
        assert_eq!(a, render_png(&scene(), RenderStyle::Camera));
        assert_eq!(&a[1..4], b"PNG");
        assert_eq!(render_rgb(&scene(), RenderStyle::Camera).len(), (WIDTH * HEIGHT * 3) as usize);
        assert_eq!((WIDTH, HEIGHT), (512, 512));
    }

    #[test]
    fn hidden_objects_are_not_drawn_and_held_is_in_band() {
        let s = scene();
        let l = layout(&s);
        let ids: Vec<&str> = l.iter().map(|p| s.objects()[p.index].id.as_str()).collect();
        assert!(!ids.contains(&"block_1"));
        let q = l.iter().find(|p| s.objects()[p.index].id.as_str() == "letter_q").unwrap();
        assert!(q.rect.y + q.rect.h <= BAND as i32);
    }

    #[test]
    fn styles_differ() {
        assert_ne!(render_rgb(&scene(), RenderStyle::Camera), render_rgb(&scene(), RenderStyle::GoalSketch));
    }

    #[test]
    fn font_covers_alphabet() {
        assert!(('A'..='Z').all(|c| glyph_rows(c).is_some()));
        assert!(glyph_rows('1').is_none());
    }
}
