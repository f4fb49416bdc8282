import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..adapters import is_supported, load_image, save_image
from ..exceptions import ImageNotFoundError
from ..models.enhance_config import EnhanceConfig
from ..models.run_record import RunRecord, format_report
from ..tensorcore import Tensor
from .imaging import mean_luminance
from .processor import enhance

_logger = logging.getLogger(__name__)


@dataclass
class RunPlan:
    input_path: str
    output_dir: str
    config: EnhanceConfig = field(default_factory=EnhanceConfig)
    report_path: str = None
    workers: int = 1
    log_level: str = 'INFO'


def output_paths(input_path, output_dir, dump_intermediates=False):
    """Output file names as a pure function of the input name and dump flag"""
    stem = os.path.splitext(os.path.basename(input_path))[0]
    paths = {'enhanced': os.path.join(output_dir, f"{stem}_enhanced.png")}
    if dump_intermediates:
        for suffix in ('R', 'I', 'N', 'Iadj'):
            paths[suffix] = os.path.join(output_dir, f"{stem}_{suffix}.png")
    return paths


def collect_inputs(input_path):
    """A single file, or every supported image of a directory in sorted path order"""
    if os.path.isdir(input_path):
        names = sorted(os.listdir(input_path))
        return [os.path.join(input_path, n) for n in names
                if is_supported(n) and os.path.isfile(os.path.join(input_path, n))]
    if not os.path.exists(input_path):
        raise ImageNotFoundError(f"Input does not exist: {input_path}")
    return [input_path]


def output_clashes(inputs, output_dir):
    """Map each input whose output name an earlier input already claims to that earlier input"""
    owners = {}
    clashes = {}
    for path in inputs:
        target = output_paths(path, output_dir)['enhanced']
        if target in owners:
            clashes[path] = owners[target]
        else:
            owners[target] = path
    return clashes


def _clash_record(path, owner, plan):
    target = os.path.basename(output_paths(path, plan.output_dir)['enhanced'])
    record = RunRecord(input_path=path, seed=plan.config.net.seed, config=plan.config.to_flat())
    record.started = record.ended = time.time()
    record.state = 'error'
    record.error_message = f"Output name {target} is already taken by {owner}"
    _logger.error(f"Skipping {path}: {record.error_message}")
    return record


def process_image(path, plan):
    """Enhance one file and return its record; failures are recorded, not raised"""
    cfg = plan.config
    record = RunRecord(input_path=path, seed=cfg.net.seed, config=cfg.to_flat())
    record.started = time.time()
    try:
        image = load_image(path)
        record.height, record.width = image.shape[1], image.shape[2]
        result = enhance(image, cfg)

        paths = output_paths(path, plan.output_dir, cfg.dump_intermediates)
        save_image(result.enhanced, paths['enhanced'])
        if cfg.dump_intermediates:
            d = result.decomposition
            save_image(d.reflectance, paths['R'])
            save_image(d.illumination, paths['I'])
            save_image(Tensor((d.noise.data + 1.0) / 2.0), paths['N'])
            save_image(result.adjusted_illumination, paths['Iadj'])
            record.intermediates = [os.path.basename(paths[k]) for k in ('R', 'I', 'N', 'Iadj')]

        trace = result.decomposition.loss_trace
        record.output_path = paths['enhanced']
        record.loss_initial = trace[0].as_dict()
        record.loss_final = trace[-1].as_dict()
        record.mean_luminance_before = mean_luminance(image)
        record.mean_luminance_after = mean_luminance(result.enhanced)
        record.state = 'success'
        record.ended = time.time()
        _logger.info(f"✓ Enhanced {path} in {record.duration:.1f}s -> {record.output_path}")
    except Exception as e:
        record.ended = time.time()
        record.state = 'error'
        record.error_message = str(e)[:500]
        _logger.error(f"Failed to enhance {path}: {e}", exc_info=True)
    return record


def run(plan):
    """Enhance every input of the plan; exit code 0 only when all images succeed"""
    inputs = collect_inputs(plan.input_path)
    os.makedirs(plan.output_dir, exist_ok=True)
    clashes = output_clashes(inputs, plan.output_dir)

    records = {}
    lock = threading.Lock()

    def _work(index, path):
        if path in clashes:
            record = _clash_record(path, clashes[path], plan)
        else:
            record = process_image(path, plan)
        with lock:
            records[index] = record

    if plan.workers > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_work, i, p) for i, p in enumerate(inputs)]
            for future in futures:
                future.result()
    else:
        for i, p in enumerate(inputs):
            _work(i, p)

    ordered = [records[i] for i in range(len(inputs))]
    failed = sum(1 for r in ordered if r.state != 'success')

    if plan.report_path:
        report_dir = os.path.dirname(plan.report_path)
        if report_dir:
            os.makedirs(report_dir, exist_ok=True)
        with open(plan.report_path, 'w', encoding='utf-8') as fh:
            fh.write(format_report(ordered))

    _logger.info(f"Processed {len(ordered)} images: {len(ordered) - failed} succeeded, {failed} failed")
    return 1 if failed else 0
