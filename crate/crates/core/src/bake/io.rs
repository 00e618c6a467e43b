//! Asset files: PNG texel images, packed occupancy bits and per-LOD shader
//! weights, indexed by the manifest.
//!
//! Per block directory `lod{l}/block_{ix}_{iy}/`:
//!
//! - `atlas_{z}_a.png`, `atlas_{z}_b.png` for `z` in `0..8`: one z slice of
//!   the atlas. Macroblocks are laid out in rows of 16 (column `i % 16`, row
//!   `i / 16`), so each image is 128 texels wide and `8 * rows` tall; unused
//!   slots are zero. Image `a` holds channels 0..4 as RGBA, `b` channels 4..8.
//! - `plane_{xy,xz,yz}_{a,b}.png`: the planes, same channel split.
//! - `occupancy.bin`: the occupancy pyramid (see `OccupancyPyramid::to_bytes`).
//!
//! The atlas indirection grid is implied by level 0 of the occupancy pyramid.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::render::ShadedBlock;
use crate::scene::assets::PLANE_NAMES;
use crate::scene::atlas::MACROBLOCK_TEXELS;
use crate::scene::{
    BlockAssets, BlockEntry, BlockFrame, BlockId, BlockLayout, DeferredShaderWeights, FileEntry,
    OccupancyPyramid, QuantizationSpec, SceneManifest, SparseAtlas, Texel, TexelPlane, CHANNELS,
    MACROBLOCK,
};
use crate::{Error, Result};

pub const ATLAS_COLUMNS: u32 = 16;
pub const OCCUPANCY_FILE: &str = "occupancy.bin";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn shader_file(lod: u32) -> String {
    format!("lod{lod}/shader.json")
}

pub fn atlas_file(z: u32, half: char) -> String {
    format!("atlas_{z}_{half}.png")
}

pub fn plane_file(plane: usize, half: char) -> String {
    format!("plane_{}_{half}.png", PLANE_NAMES[plane])
}

/// File names of a block in manifest order.
pub fn block_file_names() -> Vec<String> {
    let mut out = Vec::new();
    for z in 0..MACROBLOCK {
        for h in ['a', 'b'] {
            out.push(atlas_file(z, h));
        }
    }
    for p in 0..3 {
        for h in ['a', 'b'] {
            out.push(plane_file(p, h));
        }
    }
    out.push(OCCUPANCY_FILE.to_string());
    out
}

fn encode_png(width: u32, height: u32, rgba: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(rgba).expect("in-memory png data");
    }
    out
}

fn decode_png(path: &Path, bytes: &[u8], width: u32, height: u32) -> Result<Vec<u8>> {
    let err = |r: String| Error::asset(path, r);
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let info = reader.info();
    if info.width != width || info.height != height {
        return Err(err(format!(
            "image is {}x{}, expected {width}x{height}",
            info.width, info.height
        )));
    }
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
        return Err(err("expected 8-bit RGBA".into()));
    }
    let mut buf = vec![0u8; (width * height * 4) as usize];
    reader.next_frame(&mut buf).map_err(|e| err(e.to_string()))?;
    Ok(buf)
}

/// Splits 8-channel texels into two RGBA byte buffers.
fn split_halves<'a>(texels: impl Iterator<Item = &'a Texel>) -> [Vec<u8>; 2] {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in texels {
        a.extend_from_slice(&t[..4]);
        b.extend_from_slice(&t[4..]);
    }
    [a, b]
}

fn join_halves(a: &[u8], b: &[u8]) -> Vec<Texel> {
    a.chunks_exact(4)
        .zip(b.chunks_exact(4))
        .map(|(x, y)| std::array::from_fn(|c| if c < 4 { x[c] } else { y[c - 4] }))
        .collect()
}

fn atlas_image_dims(macroblocks: usize) -> (u32, u32) {
    let rows = (macroblocks as u32).div_ceil(ATLAS_COLUMNS).max(1);
    (ATLAS_COLUMNS * MACROBLOCK, rows * MACROBLOCK)
}

/// Atlas slice `z` as one image of texels.
fn atlas_slice(atlas: &SparseAtlas, z: u32) -> Vec<Texel> {
    let n = atlas.macroblock_count();
    let (w, h) = atlas_image_dims(n);
    let mut img = vec![[0u8; CHANNELS]; (w * h) as usize];
    for i in 0..n {
        let mb = atlas.macroblock(i);
        let (col, row) = (i as u32 % ATLAS_COLUMNS, i as u32 / ATLAS_COLUMNS);
        for y in 0..MACROBLOCK {
            for x in 0..MACROBLOCK {
                let src = ((z * MACROBLOCK + y) * MACROBLOCK + x) as usize;
                let dst = ((row * MACROBLOCK + y) * w + col * MACROBLOCK + x) as usize;
                img[dst] = mb[src];
            }
        }
    }
    img
}

/// Encoded files of one block, in manifest order.
pub fn encode_block(assets: &BlockAssets) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let (w, h) = atlas_image_dims(assets.atlas.macroblock_count());
    for z in 0..MACROBLOCK {
        let slice = atlas_slice(&assets.atlas, z);
        let [a, b] = split_halves(slice.iter());
        out.push((atlas_file(z, 'a'), encode_png(w, h, &a)));
        out.push((atlas_file(z, 'b'), encode_png(w, h, &b)));
    }
    for (p, plane) in assets.planes.iter().enumerate() {
        let [a, b] = split_halves(plane.texels.iter());
        let [pw, ph] = plane.dims;
        out.push((plane_file(p, 'a'), encode_png(pw, ph, &a)));
        out.push((plane_file(p, 'b'), encode_png(pw, ph, &b)));
    }
    out.push((OCCUPANCY_FILE.to_string(), assets.occupancy.to_bytes()));
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes one block's files under `root` and returns its manifest entry.
pub fn export_block(root: &Path, assets: &BlockAssets) -> Result<BlockEntry> {
    let id = assets.id();
    let dir = id.dir_name();
    let mut files = Vec::new();
    for (name, bytes) in encode_block(assets) {
        write_file(&root.join(&dir).join(&name), &bytes)?;
        files.push(FileEntry {
            name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(BlockEntry {
        lod: id.lod,
        ix: id.ix,
        iy: id.iy,
        dir,
        voxel_dims: assets.frame.voxel_dims,
        plane_dims: assets.plane_dims(),
        unbounded: assets.frame.unbounded,
        atlas_macroblocks: assets.atlas.macroblock_count() as u32,
        z_top: assets.z_top(),
        shader: shader_file(id.lod),
        files,
    })
}

/// Writes the shading weights of one LOD and returns their manifest entry.
pub fn export_shader(root: &Path, lod: u32, weights: &DeferredShaderWeights) -> Result<FileEntry> {
    let name = shader_file(lod);
    let mut text = serde_json::to_string_pretty(weights)?;
    text.push('\n');
    write_file(&root.join(&name), text.as_bytes())?;
    Ok(FileEntry {
        name,
        bytes: text.len() as u64,
        sha256: sha256_hex(text.as_bytes()),
    })
}

/// Reads a file and checks its size and hash against the manifest.
pub fn read_checked(path: &Path, entry: &FileEntry) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != entry.bytes {
        return Err(Error::asset(
            path,
            format!("size {} differs from manifest size {}", bytes.len(), entry.bytes),
        ));
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::asset(path, "content hash differs from manifest"));
    }
    Ok(bytes)
}

/// Source of raw file bytes for a block: a directory or anything else that
/// can produce them by name.
pub trait FileSource {
    fn read(&self, dir: &str, file: &FileEntry) -> Result<Vec<u8>>;
}

/// Files under a local asset root.
pub struct DirSource<'a>(pub &'a Path);

impl FileSource for DirSource<'_> {
    fn read(&self, dir: &str, file: &FileEntry) -> Result<Vec<u8>> {
        read_checked(&self.0.join(dir).join(&file.name), file)
    }
}

/// Decodes a block from raw files.
pub fn decode_block(
    entry: &BlockEntry,
    layout: &BlockLayout,
    quant: &QuantizationSpec,
    pyramid_levels: u32,
    files: &dyn FileSource,
) -> Result<BlockAssets> {
    let id = entry.id();
    let path_of = |name: &str| -> PathBuf { Path::new(&entry.dir).join(name) };
    let get = |name: &str| -> Result<Vec<u8>> {
        let f = entry
            .file(name)
            .ok_or_else(|| Error::asset(path_of(name), "missing from manifest"))?;
        files.read(&entry.dir, f)
    };

    let occ_bytes = get(OCCUPANCY_FILE)?;
    let pyramid = OccupancyPyramid::from_bytes(&occ_bytes)
        .map_err(|r| Error::asset(path_of(OCCUPANCY_FILE), r))?;
    if pyramid.level_count() != pyramid_levels as usize
        || pyramid.level0().dims() != entry.voxel_dims
    {
        return Err(Error::asset(
            path_of(OCCUPANCY_FILE),
            "pyramid shape differs from manifest",
        ));
    }

    let n = entry.atlas_macroblocks as usize;
    let (w, h) = atlas_image_dims(n);
    let mut texels = vec![[0u8; CHANNELS]; n * MACROBLOCK_TEXELS];
    for z in 0..MACROBLOCK {
        let a = decode_png(&path_of(&atlas_file(z, 'a')), &get(&atlas_file(z, 'a'))?, w, h)?;
        let b = decode_png(&path_of(&atlas_file(z, 'b')), &get(&atlas_file(z, 'b'))?, w, h)?;
        let slice = join_halves(&a, &b);
        for (i, mb) in texels.chunks_exact_mut(MACROBLOCK_TEXELS).enumerate() {
            let (col, row) = (i as u32 % ATLAS_COLUMNS, i as u32 / ATLAS_COLUMNS);
            for y in 0..MACROBLOCK {
                for x in 0..MACROBLOCK {
                    let dst = ((z * MACROBLOCK + y) * MACROBLOCK + x) as usize;
                    let src = ((row * MACROBLOCK + y) * w + col * MACROBLOCK + x) as usize;
                    mb[dst] = slice[src];
                }
            }
        }
    }
    let atlas = SparseAtlas::from_parts(pyramid.level0(), texels)
        .map_err(|e| Error::asset(path_of(&atlas_file(0, 'a')), e.to_string()))?;

    let mut planes = Vec::with_capacity(3);
    for p in 0..3 {
        let [pw, ph] = entry.plane_dims[p];
        let a = decode_png(&path_of(&plane_file(p, 'a')), &get(&plane_file(p, 'a'))?, pw, ph)?;
        let b = decode_png(&path_of(&plane_file(p, 'b')), &get(&plane_file(p, 'b'))?, pw, ph)?;
        planes.push(TexelPlane {
            dims: [pw, ph],
            texels: join_halves(&a, &b),
        });
    }
    let planes: [TexelPlane; 3] = planes.try_into().expect("three planes");
    let frame = BlockFrame::new(id, layout.bounds(&id), entry.voxel_dims, entry.unbounded);
    BlockAssets::new(frame, quant.clone(), atlas, planes, pyramid)
}

/// Reads one block from an asset root.
pub fn import_block(root: &Path, manifest: &SceneManifest, id: &BlockId) -> Result<BlockAssets> {
    let entry = manifest.entry(id).ok_or(Error::UnknownBlock(*id))?;
    decode_block(
        entry,
        &manifest.layout,
        &manifest.quantization,
        manifest.pyramid_levels,
        &DirSource(root),
    )
}

pub fn parse_shader(bytes: &[u8]) -> Result<DeferredShaderWeights> {
    let w: DeferredShaderWeights = serde_json::from_slice(bytes)?;
    w.validate()?;
    Ok(w)
}

/// Every shader referenced by the manifest, keyed by file name.
pub fn load_shaders(
    root: &Path,
    manifest: &SceneManifest,
) -> Result<BTreeMap<String, Arc<DeferredShaderWeights>>> {
    let mut out = BTreeMap::new();
    for s in &manifest.shaders {
        let path = root.join(&s.name);
        let bytes = read_checked(&path, s)?;
        let w = parse_shader(&bytes).map_err(|e| Error::asset(&path, e.to_string()))?;
        out.insert(s.name.clone(), Arc::new(w));
    }
    Ok(out)
}

/// Loads blocks ready for rendering.
pub fn load_blocks(root: &Path, manifest: &SceneManifest, ids: &[BlockId]) -> Result<Vec<ShadedBlock>> {
    let shaders = load_shaders(root, manifest)?;
    ids.iter()
        .map(|id| {
            let entry = manifest.entry(id).ok_or(Error::UnknownBlock(*id))?;
            let shader = shaders
                .get(&entry.shader)
                .cloned()
                .ok_or_else(|| Error::asset(root.join(&entry.shader), "shader not in manifest"))?;
            Ok(ShadedBlock {
                assets: Arc::new(import_block(root, manifest, id)?),
                shader,
            })
        })
        .collect()
}

/// Loads every block of one LOD.
pub fn load_lod(root: &Path, manifest: &SceneManifest, lod: u32) -> Result<Vec<ShadedBlock>> {
    let ids: Vec<BlockId> = manifest.layout.blocks(lod).collect();
    load_blocks(root, manifest, &ids)
}
