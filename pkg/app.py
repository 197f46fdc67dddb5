import argparse
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from infrastructures import (CheckpointRepo,
                             ConfigRepo,
                             DatasetRepo,
                             ImageRepo,
                             ReportRepo,
                             digest_of,
                             file_digest)
from models import (LabeledImage,
                    LabelMask,
                    ModelParams,
                    PatchPlacement,
                    PatchProbs,
                    PhantomSpec,
                    RasterImage,
                    RunConfig)
from pipeline import (GLOBAL_APPROACH,
                      LOCAL_APPROACH,
                      MarkerSample,
                      build_patch_sets,
                      classify_global,
                      classify_image,
                      compare_segmentations,
                      coverage,
                      evaluate_predictions,
                      gen_dataset,
                      global_grad_cam,
                      grad_cams,
                      jaccard_per_structure,
                      marker_report,
                      overlay,
                      prepare_image,
                      preprocess_pipeline,
                      prob_grad_cam,
                      render_marker_table,
                      render_metrics_table,
                      resize_mask,
                      segmenter_predict,
                      train_classifier,
                      train_segmenter,
                      under_segmentation_flag)
from pipeline.network import CLASSIFIER_KIND, SEGMENTER_KIND
from pipeline.patches import crop_placement
from pipeline.training import mean_lung_jaccard, select_segmenter_items
from shared import (InvalidArgumentError,
                    PatchTriageError,
                    configure_logging,
                    resolve_threads,
                    set_threads)
from shared.constants import CLASS_NAMES, NUM_CLASSES

logger = logging.getLogger('patchtriage')

image_repo = ImageRepo()
checkpoint_repo = CheckpointRepo()


def _report(cfg: RunConfig, inputs: Dict, body: Dict) -> Dict:
    """Every report carries the resolved config, the seed and a digest of its inputs."""
    return {'config': cfg.to_dict(), 'seed': cfg.seed, 'inputs': inputs, 'input_digest': digest_of(inputs),
            **body}


def _load_params(file_path: str, kind: str) -> ModelParams:
    params = checkpoint_repo.load(file_path)
    if params.kind != kind:
        raise InvalidArgumentError(f"{file_path} holds {params.kind!r} parameters, expected {kind!r}")
    return params


def _checkpoint_path(cli_value: Optional[str], configured: str, what: str) -> str:
    path = cli_value or configured
    if not path:
        raise InvalidArgumentError(f"no {what} checkpoint given (flag or config)")
    return path


def _load_manifest(manifest_path: str) -> Tuple[DatasetRepo, Dict]:
    if not os.path.exists(manifest_path):
        raise InvalidArgumentError(f"dataset manifest does not exist: {manifest_path}")
    return DatasetRepo.from_manifest(manifest_path), DatasetRepo.load_manifest(manifest_path)


def _segmentation_inputs(items: Sequence[LabeledImage], cfg: RunConfig) -> List[Tuple[RasterImage, LabelMask, str]]:
    triples = []
    for item in items:
        img = preprocess_pipeline(item.raw, cfg.preprocess)
        triples.append((img, resize_mask(item.mask, *img.shape), CLASS_NAMES[item.class_id]))
    return triples


def _phantom_specs(cfg: RunConfig) -> Dict[str, PhantomSpec]:
    return {label: PhantomSpec(label=label, size=cfg.phantom.size, noise_sigma=cfg.phantom.noise_sigma,
                               ctr_ratio=cfg.phantom.ctr_ratio)
            for label in cfg.phantom.classes}


def cmd_gen_phantoms(args, cfg: RunConfig) -> int:
    root = args.out or cfg.data_root
    manifest_path = gen_dataset(cfg.phantom.n_per_class, _phantom_specs(cfg), cfg.seed, root)
    print(manifest_path)
    return 0


def cmd_preprocess(args, cfg: RunConfig) -> int:
    preprocess = cfg.preprocess.for_classification() if args.resolution == 'classification' else cfg.preprocess
    raw = image_repo.read_raw(args.image)
    img = preprocess_pipeline(raw, preprocess)
    image_repo.write_png(args.output, np.rint(img.pixels).astype(np.uint8))
    image_repo.write_sidecar(os.path.splitext(args.output)[0], img.pixels)
    print(args.output)
    return 0


def _train_segmenter(args, cfg: RunConfig, repo: DatasetRepo, manifest: Dict, reports: ReportRepo) -> Dict:
    classes = cfg.segmenter.train_classes
    train = select_segmenter_items(_segmentation_inputs(repo.load_items(manifest, 'train'), cfg), classes)
    val = select_segmenter_items(_segmentation_inputs(repo.load_items(manifest, 'val'), cfg), classes)
    result = train_segmenter(train, val, cfg.segmenter)
    checkpoint = checkpoint_repo.save(reports.path(args.name or 'segmenter'), result.params)

    test = _segmentation_inputs(repo.load_items(manifest, 'test'), cfg)
    per_class = {}
    for name in CLASS_NAMES:
        pairs = [(img, mask) for img, mask, label in test if label == name]
        if pairs:
            per_class[name] = mean_lung_jaccard(result.params, pairs)
    held_out = [(img, mask) for img, mask, label in test if label in classes]
    return {'checkpoint': checkpoint, 'training': result.to_dict(),
            'test_lung_jaccard': mean_lung_jaccard(result.params, held_out) if held_out else None,
            'test_lung_jaccard_per_class': per_class}


def _train_classifier(args, cfg: RunConfig, repo: DatasetRepo, manifest: Dict, reports: ReportRepo) -> Dict:
    approach = args.approach
    train_items = repo.load_items(manifest, 'train')
    val_items = repo.load_items(manifest, 'val')
    if not train_items or not val_items:
        raise InvalidArgumentError("the manifest needs non-empty train and val splits")
    train_set = build_patch_sets(train_items, cfg.preprocess, cfg.patches, approach,
                                 cfg.patches.train_patches_per_image, cfg.seed)
    val_set = build_patch_sets(val_items, cfg.preprocess, cfg.patches, approach,
                               cfg.patches.val_patches_per_image, cfg.seed + len(train_items))
    result = train_classifier(train_set, val_set, cfg.train, NUM_CLASSES, cfg.patches.chunk_size)
    checkpoint = checkpoint_repo.save(reports.path(args.name or f"classifier_{approach}"), result.params)

    preds, truths = [], []
    for index, item in enumerate(repo.load_items(manifest, 'test')):
        img, mask = prepare_image(item, cfg.preprocess, cfg.patches.apply_mask)
        if approach == LOCAL_APPROACH:
            run = classify_image(img, mask, result.params, cfg.patches.K, cfg.patches.p, cfg.patches.q,
                                 cfg.seed + index, cfg.patches.chunk_size)
            preds.append(run.verdict.predicted_class)
        else:
            preds.append(int(np.argmax(classify_global(img, mask, result.params, cfg.patches.apply_mask))))
        truths.append(item.class_id)
    body = {'checkpoint': checkpoint, 'approach': approach, 'training': result.to_dict()}
    if truths:
        metrics = evaluate_predictions(preds, truths, NUM_CLASSES)
        body['test_metrics'] = metrics.to_dict()
        reports.save_text(f"test_metrics_{approach}.txt", render_metrics_table(metrics, CLASS_NAMES))
    return body


def cmd_train(args, cfg: RunConfig) -> int:
    repo, manifest = _load_manifest(args.manifest)
    reports = ReportRepo(cfg.output_dir)
    reports.ensure_dir()
    if args.task == 'seg':
        body = _train_segmenter(args, cfg, repo, manifest, reports)
    else:
        body = _train_classifier(args, cfg, repo, manifest, reports)
    inputs = {'manifest_digest': file_digest([args.manifest]), 'task': args.task,
              'approach': args.approach if args.task == 'cls' else None}
    name = 'train_seg.json' if args.task == 'seg' else f"train_cls_{args.approach}.json"
    path = reports.save_json(name, _report(cfg, inputs, body))
    print(path)
    return 0


def _prepared_input(image_path: str, mask_path: str, cfg: RunConfig) -> Tuple[RasterImage, LabelMask]:
    raw = image_repo.read_raw(image_path)
    mask = image_repo.read_mask(mask_path)
    return prepare_image(LabeledImage(raw, mask if mask.shape == raw.shape else resize_mask(mask, *raw.shape), 0),
                         cfg.preprocess, cfg.patches.apply_mask)


def cmd_infer(args, cfg: RunConfig) -> int:
    params = _load_params(_checkpoint_path(args.checkpoint, cfg.classifier_checkpoint, 'classifier'),
                          CLASSIFIER_KIND)
    img, mask = _prepared_input(args.image, args.mask, cfg)
    inputs = {'image_path': args.image, 'mask_path': args.mask, 'mode': args.mode,
              'image_digest': file_digest([args.image, args.mask]), 'checkpoint_meta': params.meta}
    if args.mode == LOCAL_APPROACH:
        run = classify_image(img, mask, params, cfg.patches.K, cfg.patches.p, cfg.patches.q, cfg.seed,
                             cfg.patches.chunk_size)
        body = run.to_dict()
    else:
        probs = classify_global(img, mask, params, cfg.patches.apply_mask)
        body = {'prediction': int(np.argmax(probs)), 'probs': probs.tolist()}
    body['prediction_label'] = CLASS_NAMES[body['prediction']]
    path = ReportRepo(cfg.output_dir).save_json(args.out or f"verdict_{args.mode}.json",
                                                _report(cfg, inputs, body))
    print(path)
    return 0


def cmd_saliency(args, cfg: RunConfig) -> int:
    class_id = cfg.saliency.class_id if args.class_id is None else args.class_id
    if not 0 <= class_id < NUM_CLASSES:
        raise InvalidArgumentError(f"class index {class_id} out of range [0, {NUM_CLASSES})")
    params = _load_params(_checkpoint_path(args.checkpoint, cfg.classifier_checkpoint, 'classifier'),
                          CLASSIFIER_KIND)
    reports = ReportRepo(cfg.output_dir)
    if args.mode == LOCAL_APPROACH:
        replay = ReportRepo.load_json(args.replay)
        try:
            image_path = args.image or replay['inputs']['image_path']
            mask_path = args.mask or replay['inputs']['mask_path']
            placements = [PatchPlacement.from_dict(entry) for entry in replay['placements']]
            probs = PatchProbs(replay['probs'])
        except (KeyError, TypeError) as error:
            raise InvalidArgumentError(f"{args.replay} is not a local verdict replay: {error}")
        img, mask = _prepared_input(image_path, mask_path, cfg)
        patches = [crop_placement(img, placement) for placement in placements]
        maps = grad_cams(patches, params, class_id, cfg.patches.chunk_size)
        saliency = prob_grad_cam(maps, probs, placements, coverage(placements, *img.shape), class_id)
        inputs = {'replay_digest': file_digest([args.replay]), 'class_id': class_id, 'mode': args.mode}
    else:
        if not (args.image and args.mask):
            raise InvalidArgumentError("global saliency needs --image and --mask")
        img, mask = _prepared_input(args.image, args.mask, cfg)
        saliency = global_grad_cam(img, mask, params, class_id, cfg.patches.apply_mask)
        inputs = {'image_digest': file_digest([args.image, args.mask]), 'class_id': class_id, 'mode': args.mode}

    base = args.out or f"saliency_{args.mode}_class{class_id}"
    reports.ensure_dir()
    png_path = reports.path(base + '.png')
    image_repo.write_saliency(png_path, saliency, cfg.saliency.write_sidecar)
    outputs = {'png': png_path}
    if cfg.saliency.write_overlay:
        composite = overlay(img, saliency)
        outputs['overlay'] = reports.path(base + '_overlay.png')
        image_repo.write_png(outputs['overlay'], np.clip(np.rint(composite.pixels), 0, 255).astype(np.uint8))
    summary = {'outputs': outputs, 'max': float(saliency.values.max())}
    reports.save_json(base + '_report.json', _report(cfg, inputs, summary))
    print(png_path)
    return 0


def cmd_biomarkers(args, cfg: RunConfig) -> int:
    repo, manifest = _load_manifest(args.manifest)
    items = repo.load_items(manifest, cfg.biomarkers.split)
    segmenter = None
    if cfg.biomarkers.use_predicted_masks or args.segmenter:
        segmenter = _load_params(_checkpoint_path(args.segmenter, cfg.segmenter_checkpoint, 'segmenter'),
                                 SEGMENTER_KIND)
    classifier = None
    if cfg.biomarkers.correct_patches_only:
        classifier = _load_params(_checkpoint_path(args.classifier, cfg.classifier_checkpoint, 'classifier'),
                                  CLASSIFIER_KIND)

    dataset: Dict[str, List[MarkerSample]] = {}
    for item in items:
        img, mask = prepare_image(item, cfg.preprocess, masked=False)
        predicted = None
        if segmenter is not None:
            small = preprocess_pipeline(item.raw, cfg.preprocess)
            predicted = resize_mask(segmenter_predict(small, segmenter), *img.shape)
        dataset.setdefault(CLASS_NAMES[item.class_id], []).append(MarkerSample(img, mask, predicted))
    table = marker_report(dataset, cfg.biomarkers, cfg.patches, cfg.seed, classifier)

    reports = ReportRepo(cfg.output_dir)
    inputs = {'manifest_digest': file_digest([args.manifest]), 'split': cfg.biomarkers.split}
    path = reports.save_json('markers.json', _report(cfg, inputs, table.to_dict()))
    reports.save_text('markers.txt', render_marker_table(table))
    print(path)
    return 0


def _read_ids(file_path: str) -> List[int]:
    values = ReportRepo.load_json(file_path)
    if isinstance(values, dict):
        values = values.get('labels')
    if not isinstance(values, list) or not all(type(value) is int for value in values):
        raise InvalidArgumentError(f"{file_path} must hold a JSON list of class ids")
    return values


def cmd_evaluate(args, cfg: RunConfig) -> int:
    preds, truths = _read_ids(args.predictions), _read_ids(args.truths)
    report = evaluate_predictions(preds, truths, args.num_classes)
    reports = ReportRepo(cfg.output_dir)
    inputs = {'files_digest': file_digest([args.predictions, args.truths]), 'num_classes': args.num_classes}
    path = reports.save_json(args.out or 'metrics.json', _report(cfg, inputs, report.to_dict()))
    names = CLASS_NAMES if args.num_classes == NUM_CLASSES else ()
    reports.save_text(os.path.splitext(args.out or 'metrics.json')[0] + '.txt', render_metrics_table(report, names))
    print(path)
    return 0


def _segmentation_scores(params: ModelParams, triples) -> List[Dict]:
    rows = []
    for img, mask, label in triples:
        predicted = segmenter_predict(img, params)
        scores = jaccard_per_structure(predicted, mask)
        rows.append({'label': label, 'lung_jaccard': scores['lung'], 'heart_jaccard': scores['heart'],
                     'under_segmented': under_segmentation_flag(predicted.lung, mask.lung)})
    return rows


def cmd_evaluate_seg(args, cfg: RunConfig) -> int:
    reports = ReportRepo(cfg.output_dir)
    if args.predicted and args.reference:
        predicted, reference = image_repo.read_mask(args.predicted), image_repo.read_mask(args.reference)
        scores = jaccard_per_structure(predicted, reference)
        body = {'lung_jaccard': scores['lung'], 'heart_jaccard': scores['heart'],
                'under_segmented': under_segmentation_flag(predicted.lung, reference.lung)}
        inputs = {'masks_digest': file_digest([args.predicted, args.reference])}
    elif args.manifest:
        repo, manifest = _load_manifest(args.manifest)
        params = _load_params(_checkpoint_path(args.checkpoint, cfg.segmenter_checkpoint, 'segmenter'),
                              SEGMENTER_KIND)
        triples = _segmentation_inputs(repo.load_items(manifest, args.split), cfg)
        rows = _segmentation_scores(params, triples)
        summary = {}
        for name in CLASS_NAMES:
            members = [row for row in rows if row['label'] == name]
            if members:
                summary[name] = {'n': len(members),
                                 'median_lung_jaccard': float(np.median([row['lung_jaccard'] for row in members])),
                                 'under_segmented': sum(row['under_segmented'] for row in members)}
        body = {'images': rows, 'per_class': summary,
                'median_lung_jaccard': float(np.median([row['lung_jaccard'] for row in rows])) if rows else None}
        if args.baseline:
            baseline = _segmentation_scores(_load_params(args.baseline, SEGMENTER_KIND), triples)
            result = compare_segmentations([row['lung_jaccard'] for row in rows],
                                           [row['lung_jaccard'] for row in baseline])
            body['comparison'] = result.to_dict()
        inputs = {'manifest_digest': file_digest([args.manifest]), 'split': args.split}
    else:
        raise InvalidArgumentError("evaluate-seg needs --predicted/--reference or --manifest")
    path = reports.save_json(args.out or 'segmentation.json', _report(cfg, inputs, body))
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='patchtriage',
                                     description='Patch-based chest radiograph triage on synthetic phantoms.')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='store_true')
    parser.add_argument('--threads', type=int, default=None)
    parser.add_argument('--config', default=None, help='run config JSON (default: data_store/default_config.json)')
    parser.add_argument('--output-dir', default=None, help='overrides output_dir of the config')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-phantoms', help='render a phantom dataset')
    gen.add_argument('--out', default=None, help='dataset root (default: data_root of the config)')
    gen.set_defaults(handler=cmd_gen_phantoms)

    pre = commands.add_parser('preprocess', help='equalize, gamma-correct and resize one raw image')
    pre.add_argument('--image', required=True)
    pre.add_argument('--output', required=True)
    pre.add_argument('--resolution', choices=('segmentation', 'classification'), default='segmentation')
    pre.set_defaults(handler=cmd_preprocess)

    train = commands.add_parser('train', help='train the segmenter or a classifier')
    train.add_argument('--manifest', required=True)
    train.add_argument('--task', choices=('seg', 'cls'), required=True)
    train.add_argument('--approach', choices=(LOCAL_APPROACH, GLOBAL_APPROACH), default=LOCAL_APPROACH)
    train.add_argument('--name', default=None, help='checkpoint base name')
    train.set_defaults(handler=cmd_train)

    infer = commands.add_parser('infer', help='classify one image')
    infer.add_argument('--image', required=True)
    infer.add_argument('--mask', required=True)
    infer.add_argument('--checkpoint', default=None)
    infer.add_argument('--mode', choices=(LOCAL_APPROACH, GLOBAL_APPROACH), default=LOCAL_APPROACH)
    infer.add_argument('--out', default=None)
    infer.set_defaults(handler=cmd_infer)

    saliency = commands.add_parser('saliency', help='probabilistic Grad-CAM from a verdict replay')
    saliency.add_argument('--replay', default=None)
    saliency.add_argument('--checkpoint', default=None)
    saliency.add_argument('--class', dest='class_id', type=int, default=None)
    saliency.add_argument('--mode', choices=(LOCAL_APPROACH, GLOBAL_APPROACH), default=LOCAL_APPROACH)
    saliency.add_argument('--image', default=None)
    saliency.add_argument('--mask', default=None)
    saliency.add_argument('--out', default=None, help='output base name')
    saliency.set_defaults(handler=cmd_saliency)

    markers = commands.add_parser('biomarkers', help='marker tables across the classes of a dataset')
    markers.add_argument('--manifest', required=True)
    markers.add_argument('--segmenter', default=None)
    markers.add_argument('--classifier', default=None)
    markers.set_defaults(handler=cmd_biomarkers)

    evaluate = commands.add_parser('evaluate', help='classification metrics from prediction and truth files')
    evaluate.add_argument('--predictions', required=True)
    evaluate.add_argument('--truths', required=True)
    evaluate.add_argument('--num-classes', type=int, default=NUM_CLASSES)
    evaluate.add_argument('--out', default=None)
    evaluate.set_defaults(handler=cmd_evaluate)

    evaluate_seg = commands.add_parser('evaluate-seg', help='Jaccard and under-segmentation of masks')
    evaluate_seg.add_argument('--predicted', default=None)
    evaluate_seg.add_argument('--reference', default=None)
    evaluate_seg.add_argument('--manifest', default=None)
    evaluate_seg.add_argument('--checkpoint', default=None)
    evaluate_seg.add_argument('--baseline', default=None, help='second segmenter checkpoint for a paired comparison')
    evaluate_seg.add_argument('--split', default='test', choices=('all', 'train', 'val', 'test'))
    evaluate_seg.add_argument('--out', default=None)
    evaluate_seg.set_defaults(handler=cmd_evaluate_seg)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(-1 if args.quiet else args.verbose)
    try:
        set_threads(resolve_threads(args.threads))
        cfg = ConfigRepo().load(args.config)
        if args.output_dir:
            cfg = RunConfig.from_dict({**cfg.to_dict(), 'output_dir': args.output_dir})
        if args.command == 'saliency' and args.mode == LOCAL_APPROACH and not args.replay:
            raise InvalidArgumentError("local saliency needs --replay")
        return args.handler(args, cfg)
    except PatchTriageError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
