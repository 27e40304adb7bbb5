use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::FootageClip;
use crate::error::{Error, Result};
use crate::layout::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord};

pub const DEFAULT_SOURCE_WIDTH: f64 = 960.0;
pub const DEFAULT_SOURCE_HEIGHT: f64 = 540.0;

fn located(doc: &Document, node: Node, message: impl Into<String>) -> Error {
    let pos = doc.text_pos_at(node.range().start);
    Error::Parse { line: pos.row, column: pos.col, message: message.into() }
}

fn attr<'a>(doc: &Document, node: Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.attribute(name)
        .ok_or_else(|| located(doc, node, format!("<{}> is missing attribute `{name}`", node.tag_name().name())))
}

fn number(doc: &Document, node: Node, name: &str) -> Result<f64> {
    let raw = attr(doc, node, name)?;
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(located(doc, node, format!("attribute `{name}` = {raw:?} is not a finite number"))),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

/// Parses a UA-DETRAC annotation document.
///
/// Pixel boxes `(left, top, width, height)` are normalized by the source
/// frame size, taken from optional `width`/`height` attributes on
/// `<sequence>` and otherwise 960x540. Boxes reaching outside the frame are
/// clamped. Frame numbers must increase; skipped numbers become empty
/// frames.
pub fn parse_detrac_xml(text: &str) -> Result<FootageClip> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Parse { line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    let root = doc.root_element();
    if !root.has_tag_name("sequence") {
        return Err(located(&doc, root, format!("root element is <{}>, expected <sequence>", root.tag_name().name())));
    }
    let name = root.attribute("name").unwrap_or("unnamed").to_string();
    let width = match root.attribute("width") {
        Some(_) => number(&doc, root, "width")?,
        None => DEFAULT_SOURCE_WIDTH,
    };
    let height = match root.attribute("height") {
        Some(_) => number(&doc, root, "height")?,
        None => DEFAULT_SOURCE_HEIGHT,
    };
    if width <= 0.0 || height <= 0.0 {
        return Err(located(&doc, root, format!("source frame {width}x{height} must be positive")));
    }

    let mut frames: Vec<SceneAnnotation> = Vec::new();
    for frame in root.children().filter(|n| n.has_tag_name("frame")) {
        let raw = attr(&doc, frame, "num")?;
        let num: u64 = raw
            .trim()
            .parse()
            .map_err(|_| located(&doc, frame, format!("frame number {raw:?} is not a non-negative integer")))?;
        if let Some(last) = frames.last() {
            if num <= last.frame_index() {
                return Err(located(&doc, frame, format!("frame {num} does not follow frame {}", last.frame_index())));
            }
            for gap in last.frame_index() + 1..num {
                frames.push(SceneAnnotation::empty(gap));
            }
        }
        let mut vehicles = Vec::new();
        if let Some(list) = child(frame, "target_list") {
            for target in list.children().filter(|n| n.has_tag_name("target")) {
                vehicles.push(parse_target(&doc, target, width, height)?);
            }
        }
        let scene = SceneAnnotation::new(num, vehicles).map_err(|e| located(&doc, frame, e.to_string()))?;
        frames.push(scene);
    }
    FootageClip::new(name, width, height, frames)
}

fn parse_target(doc: &Document, target: Node, width: f64, height: f64) -> Result<VehicleRecord> {
    let raw = attr(doc, target, "id")?;
    let id: u32 = raw
        .trim()
        .parse()
        .map_err(|_| located(doc, target, format!("target id {raw:?} is not an unsigned integer")))?;
    let bx = child(target, "box").ok_or_else(|| located(doc, target, format!("target {id} has no <box>")))?;
    let left = number(doc, bx, "left")?;
    let top = number(doc, bx, "top")?;
    let w = number(doc, bx, "width")?;
    let h = number(doc, bx, "height")?;
    if w < 0.0 || h < 0.0 {
        return Err(located(doc, bx, format!("target {id} has negative extent {w}x{h}")));
    }
    let bbox = BoundingBox::clamped(left / width, top / height, (left + w) / width, (top + h) / height)
        .ok_or_else(|| located(doc, bx, format!("target {id} box is not finite")))?;
    let class = match child(target, "attribute").and_then(|a| a.attribute("vehicle_type")) {
        Some(label) => VehicleClass::from_label(label),
        None => return Err(located(doc, target, format!("target {id} has no vehicle_type attribute"))),
    };
    Ok(VehicleRecord::new(id, class, bbox))
}

/// Writes a clip in the same document subset the parser reads. Coordinates
/// are written with full precision so that a re-parse reproduces the clip.
pub fn write_detrac_xml(clip: &FootageClip) -> String {
    let (w, h) = (clip.frame_width(), clip.frame_height());
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    let _ = writeln!(out, "<sequence name=\"{}\" width=\"{w:?}\" height=\"{h:?}\">", escape(clip.name()));
    for frame in clip.frames() {
        let _ = writeln!(out, "  <frame density=\"{}\" num=\"{}\">", frame.len(), frame.frame_index());
        out.push_str("    <target_list>\n");
        for v in frame.vehicles() {
            let [b1, b2, b3, b4] = v.bbox.coords();
            let _ = writeln!(out, "      <target id=\"{}\">", v.track_id);
            let _ = writeln!(
                out,
                "        <box left=\"{:?}\" top=\"{:?}\" width=\"{:?}\" height=\"{:?}\"/>",
                b1 * w,
                b2 * h,
                (b3 - b1) * w,
                (b4 - b2) * h
            );
            let _ = writeln!(out, "        <attribute vehicle_type=\"{}\"/>", v.class.label());
            out.push_str("      </target>\n");
        }
        out.push_str("    </target_list>\n  </frame>\n");
    }
    out.push_str("</sequence>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
