"""
配置文件，存储全局设置
"""

# 数据集配置
DATASET_PATH = "data/dataset.json"  # 标注数据集路径
EMBEDDINGS_PATH = "data/embeddings.jsonl"  # 预计算的联合空间向量
SIMILAR_SETS_PATH = "data/similar_sets.jsonl"  # 相似图像集输出路径
WEIGHTS_PATH = "data/weights.jsonl"  # 真值权重表输出路径
DF_PATH = "data/df_train.pkl"  # 文档频率缓存路径

# 文件格式
EMBEDDING_FORMAT = "dcev1"
WEIGHTS_FORMAT = "dcev1-weights"
QUERY_CAPTION_INDEX = -1  # 生成描述的查询向量使用的保留编号

# CIDEr配置
MAX_ORDER = 4  # 最大n-gram阶数
SIGMA = 6.0  # 长度惩罚的高斯宽度
CIDER_SCALE = 10.0
CIDER_VARIANT = "cider-d"  # cider-d 或 cider

# 相似图像集配置
DEFAULT_K = 5  # 每个目标图像的相似图像数量
DEFAULT_SPLIT = "test"
DF_SPLIT = "train"  # 训练时权重使用训练集的文档频率

# 权重与奖励配置
LAMBDA_W = 1.5
ALPHA_W = 0.5
ALPHA_R = 0.4
ALPHA_L = 1.0  # 1为只训练XE，0为只训练RL

# 评测配置
RECALL_KS = (1, 5, 10)
REPORT_FORMAT = "markdown"

# 性能优化配置
MAX_THREADS = 0  # 最大线程数，0表示自动选择（基于CPU核心数）
THREAD_LIMIT = 8  # 自动选择时的线程上限
BATCH_SIZE = 1000  # 批处理大小（图像数）
SERVE_WORKERS = 4  # 奖励服务的并发评分线程数

# 输出配置
VERBOSE = True  # 是否输出进度信息（输出到stderr）
