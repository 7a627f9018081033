use exmerge::annotations::{decode_rle, encode_rle, parse_annotation_document, serialize_annotation_document};
use exmerge::compositor::{composite, CompositeJob, PlacedInstance, SceneLayer};
use exmerge::selection::{bbox_area, rank_persons, SelectionSpec};
use exmerge::{AnnotationDocument, BBox, BitMask, InstanceAnnotation, PixelBuffer, RleMask};
use proptest::prelude::*;

/// Canonical RLE: leading zero-run may be empty, later runs are positive.
fn arb_canonical_rle() -> impl Strategy<Value = RleMask> {
    (
        1u32..16,
        0u32..6,
        proptest::collection::vec(1u32..20, 0..12),
    )
        .prop_map(|(h, first, rest)| {
            let mut counts = vec![first];
            counts.extend(rest);
            // extend the final run so the sum is a positive multiple of h
            let total: u32 = counts.iter().sum();
            let pad = if total == 0 { h } else { (h - total % h) % h };
            *counts.last_mut().unwrap() += pad;
            let total: u32 = counts.iter().sum();
            RleMask::new(h, total / h, counts).unwrap()
        })
}

fn arb_document() -> impl Strategy<Value = AnnotationDocument> {
    (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
        let instance = (
            prop_oneof![Just("person"), Just("dog"), Just("bicycle")],
            0u32..=1000,
            (0..=h, 0..=h, 0..=w, 0..=w),
            proptest::collection::vec(any::<bool>(), (w * h) as usize),
            proptest::option::of(0u64..1000),
        );
        (
            proptest::collection::vec(instance, 0..5),
            "[a-z]{0,8}\\.png",
        )
            .prop_map(move |(raw, source)| {
                let mut doc = AnnotationDocument::new(w, h, source);
                for (i, (class, score, (ya, yb, xa, xb), bits, id)) in raw.into_iter().enumerate() {
                    let mask = BitMask::from_row_major(h, w, bits).unwrap();
                    doc.instances.push(InstanceAnnotation {
                        // offset keeps ids unique
                        instance_id: id.map_or(i as u64, |v| v * 8 + i as u64),
                        class_label: class.into(),
                        score: f64::from(score) / 1000.0,
                        bbox: BBox::new(ya.min(yb), xa.min(xb), ya.max(yb), xa.max(xb)),
                        mask: encode_rle(&mask),
                    });
                }
                doc
            })
    })
}

fn arb_layer(w: u32, h: u32) -> impl Strategy<Value = (Vec<u8>, Vec<Vec<bool>>)> {
    let n = (w * h) as usize;
    (
        proptest::collection::vec(any::<u8>(), n * 3),
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), 0..4),
    )
}

proptest! {
    #[test]
    fn canonical_rle_round_trips(rle in arb_canonical_rle()) {
        let mask = decode_rle(&rle);
        prop_assert_eq!(mask.len() as u64, u64::from(rle.height()) * u64::from(rle.width()));
        prop_assert_eq!(encode_rle(&mask), rle);
    }

    #[test]
    fn documents_round_trip(doc in arb_document()) {
        let parsed = parse_annotation_document(&serialize_annotation_document(&doc)).unwrap();
        prop_assert_eq!(parsed.document, doc);
    }

    #[test]
    fn ranking_is_sorted_filtered_and_scale_invariant(doc in arb_document(), s in 1u32..5) {
        let spec = SelectionSpec { min_score: 0.3, ..SelectionSpec::default() };
        let ranked = rank_persons(&doc, &spec);
        prop_assert!(ranked.windows(2).all(|p| p[0].area >= p[1].area));
        prop_assert!(ranked.iter().all(|r| r.annotation.class_label == "person" && r.annotation.score >= 0.3));
        prop_assert!(ranked.iter().all(|r| r.area == bbox_area(&r.annotation.bbox)));
        prop_assert_eq!(&rank_persons(&doc, &spec), &ranked);

        let mut scaled = doc.clone();
        for inst in &mut scaled.instances {
            let b = inst.bbox;
            inst.bbox = BBox::new(b.y1 * s, b.x1 * s, b.y2 * s, b.x2 * s);
        }
        let rescaled = rank_persons(&scaled, &spec);
        let ids = |r: &[exmerge::selection::RankedInstance<'_>]| r.iter().map(|x| x.instance_id).collect::<Vec<_>>();
        prop_assert_eq!(ids(&rescaled), ids(&ranked));
        for (a, b) in ranked.iter().zip(&rescaled) {
            prop_assert_eq!(b.area, a.area * u64::from(s * s));
        }
    }

    #[test]
    fn instance_order_within_a_layer_is_irrelevant(
        (w, h, bg, (img, masks)) in (1u32..8, 1u32..8).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), proptest::collection::vec(any::<u8>(), (w * h * 3) as usize), arb_layer(w, h))
        })
    ) {
        let placed: Vec<PlacedInstance> = masks
            .into_iter()
            .enumerate()
            .map(|(i, bits)| PlacedInstance {
                instance_id: i as u64,
                area: 0,
                mask: BitMask::from_row_major(h, w, bits).unwrap(),
            })
            .collect();
        let background = PixelBuffer::new(w, h, bg).unwrap();
        let image = PixelBuffer::new(w, h, img).unwrap();
        let forward = CompositeJob::new(
            background.clone(),
            vec![SceneLayer::new(image.clone(), placed.clone()).unwrap()],
        )
        .unwrap();
        let mut reversed_instances = placed;
        reversed_instances.reverse();
        let reversed = CompositeJob::new(
            background,
            vec![SceneLayer::new(image, reversed_instances).unwrap()],
        )
        .unwrap();
        let out = composite(&forward);
        prop_assert_eq!(out.dimensions(), (w, h));
        prop_assert_eq!(out, composite(&reversed));
    }
}
